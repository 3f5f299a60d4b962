#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "metabayes/data.hpp"
#include "metabayes/model.hpp"
#include "metabayes/posterior.hpp"

namespace fixtures {

using namespace metabayes;

inline std::filesystem::path source_dir() { return METABAYES_SOURCE_DIR; }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("metabayes_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Dataset binary_pairwise() { return builtin_dataset(BuiltinDataset::boucher2016_pairwise); }
inline Dataset binary_doses() { return builtin_dataset(BuiltinDataset::boucher2016_full); }

inline Dataset continuous_pairwise() {
  const double means[][2] = {{1.2, 2.0}, {0.8, 1.1}, {1.5, 2.6}, {0.9, 1.7}, {1.1, 1.4}};
  const double ses[][2] = {{0.30, 0.35}, {0.25, 0.28}, {0.40, 0.38}, {0.22, 0.30}, {0.33, 0.31}};
  std::vector<ArmRecord> arms;
  for (int s = 0; s < 5; ++s) {
    for (int a = 0; a < 2; ++a) arms.push_back({s + 1, a, std::nullopt, ContinuousOutcome{means[s][a], ses[s][a]}});
  }
  return Dataset(Endpoint::continuous, arms);
}

inline Dataset count_pairwise() {
  const long events[][2] = {{12, 20}, {5, 9}, {30, 41}, {8, 8}, {17, 26}};
  const double exposure[][2] = {{100, 110}, {60, 55}, {250, 240}, {80, 75}, {150, 160}};
  std::vector<ArmRecord> arms;
  for (int s = 0; s < 5; ++s) {
    for (int a = 0; a < 2; ++a) arms.push_back({s + 1, a, std::nullopt, CountOutcome{events[s][a], exposure[s][a]}});
  }
  return Dataset(Endpoint::count, arms);
}

/// Four studies with 2, 3, 4 and 2 arms; doses up to 100.
inline Dataset continuous_doses() {
  struct Row { int study, arm; double dose, mean, se; };
  const Row rows[] = {{1, 0, 0, 0.1, 0.2},  {1, 1, 50, 1.2, 0.25}, {2, 0, 0, -0.2, 0.3}, {2, 1, 10, 0.5, 0.3},
                      {2, 2, 100, 1.6, 0.28}, {3, 0, 0, 0.0, 0.22}, {3, 1, 5, 0.4, 0.25}, {3, 2, 25, 1.0, 0.24},
                      {3, 3, 75, 1.5, 0.26}, {4, 0, 0, 0.3, 0.3},  {4, 1, 20, 1.1, 0.32}};
  std::vector<ArmRecord> arms;
  for (const Row& r : rows) arms.push_back({r.study, r.arm, r.dose, ContinuousOutcome{r.mean, r.se}});
  return Dataset(Endpoint::continuous, arms);
}

inline Dataset count_doses() {
  struct Row { int study, arm; double dose; long events; double exposure; };
  const Row rows[] = {{1, 0, 0, 10, 100}, {1, 1, 50, 25, 100}, {2, 0, 0, 7, 80},   {2, 1, 10, 11, 85},
                      {2, 2, 100, 22, 90}, {3, 0, 0, 4, 50},   {3, 1, 5, 6, 52},   {3, 2, 25, 10, 48},
                      {3, 3, 75, 15, 50},  {4, 0, 0, 9, 120},  {4, 1, 20, 18, 118}};
  std::vector<ArmRecord> arms;
  for (const Row& r : rows) arms.push_back({r.study, r.arm, r.dose, CountOutcome{r.events, r.exposure}});
  return Dataset(Endpoint::count, arms);
}

inline Dataset pairwise_data(Endpoint endpoint) {
  switch (endpoint) {
    case Endpoint::binary: return binary_pairwise();
    case Endpoint::continuous: return continuous_pairwise();
    case Endpoint::count: return count_pairwise();
  }
  return {};
}

inline Dataset dose_data(Endpoint endpoint) {
  switch (endpoint) {
    case Endpoint::binary: return binary_doses();
    case Endpoint::continuous: return continuous_doses();
    case Endpoint::count: return count_doses();
  }
  return {};
}

/// Deterministic n x p covariate matrix with a 0/1 column and a numeric one.
inline std::vector<std::vector<double>> covariates(std::size_t n, std::size_t p) {
  std::vector<std::vector<double>> x(n, std::vector<double>(p));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < p; ++k) x[i][k] = k == 0 ? static_cast<double>(i % 2) : 0.3 * static_cast<double>(i) - 0.5;
  }
  return x;
}

inline ModelSpec topiramate_spec() {
  ModelSpec spec;
  spec.family = ModelFamily::pairwise;
  spec.endpoint = Endpoint::binary;
  spec.priors.mu = PriorSpec::normal(0, 10);
  spec.priors.theta = PriorSpec::normal(0, 2.5);
  spec.priors.tau = PriorSpec::half_normal(0.5);
  return spec;
}

/// Largest |analytic - central difference| / max(1, |analytic|, |fd|) over all
/// coordinates at `z`. Differences are taken in w, where z_k = scale_k * w_k.
inline double gradient_error(const Posterior& posterior, std::vector<double> z, double h = 1e-5,
                             const std::vector<double>& scale = {}) {
  const auto analytic = posterior.evaluate(z).gradient;
  double worst = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double s = scale.empty() ? 1.0 : scale[k];
    const double z0 = z[k];
    z[k] = z0 + s * h;
    const double up = posterior.log_density(z);
    z[k] = z0 - s * h;
    const double down = posterior.log_density(z);
    z[k] = z0;
    const double fd = (up - down) / (2.0 * h);
    const double a = s * analytic[k];
    const double denom = std::max({1.0, std::abs(a), std::abs(fd)});
    worst = std::max(worst, std::abs(a - fd) / denom);
  }
  return worst;
}

inline std::vector<double> random_point(std::size_t dim, std::mt19937_64& engine, double radius = 1.5) {
  std::uniform_real_distribution<double> unif(-radius, radius);
  std::vector<double> z(dim);
  for (double& v : z) v = unif(engine);
  return z;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace fixtures
