#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "metabayes/posterior.hpp"

namespace metabayes {

/// Per-chain random stream: mt19937_64 seeded with splitmix64(seed, chain).
/// Uniform and normal variates are generated here rather than through the
/// <random> distributions so draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  static Rng for_chain(std::uint64_t seed, std::uint64_t chain);

  double uniform();                  // [0, 1)
  double uniform(double lo, double hi);
  double normal();                   // standard normal, Marsaglia polar method
  int uniform_int(int lo, int hi);   // inclusive

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct SamplerConfig {
  int chains = 4;
  int iter = 4000;
  int warmup = 2000;
  std::uint64_t seed = 20210611;
  double target_accept = 0.8;
  int max_leapfrog_steps = 1024;
  double init_radius = 2.0;
  /// Trajectory length eps * L targeted when picking the step cap L.
  double integration_time = 1.5;
  /// Worker threads for chains; 0 = one per chain.
  int threads = 0;

  void validate() const;
};

using LogDensityFn = std::function<LogDensityResult(std::span<const double>)>;

/// A sampling target: dimension, log density with gradient, and the map to
/// the reporting (constrained) scale.
struct Target {
  std::size_t dimension = 0;
  LogDensityFn log_density;
  std::function<std::vector<double>(std::span<const double>)> constrain;
  std::vector<std::string> names;
};

Target make_target(const Posterior& posterior);

/// Position with its cached log density and gradient.
struct PhasePoint {
  std::vector<double> z;
  double log_density = 0.0;
  std::vector<double> gradient;
};

PhasePoint make_point(const LogDensityFn& fn, std::vector<double> z);

double kinetic_energy(std::span<const double> momentum, std::span<const double> inv_mass);

/// Leapfrog integration of `n_steps` steps. `inv_mass` is the diagonal
/// inverse metric (variance-like). Returns false if the state became
/// non-finite; `point` and `momentum` are then unspecified.
bool leapfrog(PhasePoint& point, std::vector<double>& momentum, double step_size, int n_steps,
              const LogDensityFn& fn, std::span<const double> inv_mass);

struct Transition {
  PhasePoint point;
  /// Metropolis probability of the endpoint.
  double accept_prob = 0.0;
  /// Mean of min(1, exp(-dH)) over the trajectory; drives step-size adaptation.
  double accept_stat = 0.0;
  bool divergent = false;
  int n_steps = 0;
};

/// One static-length HMC transition with trajectory length drawn uniformly
/// from [1, max_steps]. Divergent when the energy error exceeds 1000 or the
/// trajectory leaves the finite reals.
Transition hmc_transition(const PhasePoint& current, double step_size, std::span<const double> inv_mass,
                          int max_steps, const LogDensityFn& fn, Rng& rng);

/// Dual-averaging state for step-size adaptation.
class StepSizeAdapter {
 public:
  StepSizeAdapter(double target_accept, double initial_step);
  void restart(double initial_step);
  /// Feed one acceptance statistic; returns the step size for the next transition.
  double update(double accept_prob);
  double final_step() const;

 private:
  double target_;
  double mu_ = 0.0;
  double h_bar_ = 0.0;
  double log_step_ = 0.0;
  double log_step_bar_ = 0.0;
  int count_ = 0;
};

/// Doubling/halving heuristic: scales the step until one leapfrog step's
/// acceptance crosses 0.5.
double find_reasonable_step_size(const PhasePoint& point, double step_size, std::span<const double> inv_mass,
                                 const LogDensityFn& fn, Rng& rng);

struct WarmupResult {
  PhasePoint point;
  double step_size = 1.0;
  std::vector<double> inv_mass;
  int divergences = 0;
  int transitions = 0;
  bool mass_adapted = false;
  std::vector<std::string> warnings;
};

/// Windowed warmup: fast step-size phase, expanding slow windows that
/// re-estimate the diagonal inverse metric, terminal fast phase.
WarmupResult adapt_warmup(const LogDensityFn& fn, PhasePoint start, const SamplerConfig& config, Rng& rng);

struct ChainOutput {
  std::size_t dimension = 0;
  /// Post-warmup draws, row-major (iteration x dimension).
  std::vector<double> draws;
  std::vector<double> constrained_draws;
  std::vector<double> accept_stats;
  int divergences = 0;
  int warmup_divergences = 0;
  double step_size = 0.0;
  std::vector<double> inv_mass;
  std::vector<std::string> warnings;

  std::size_t n_draws() const { return dimension == 0 ? 0 : constrained_draws.size() / dimension; }
  std::vector<double> constrained_column(std::size_t index) const;
};

struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<ChainOutput> chains;

  std::size_t index_of(std::string_view name) const;  // throws ConfigError when unknown
  bool has(std::string_view name) const;
  /// Constrained draws of one parameter, one vector per chain.
  std::vector<std::vector<double>> per_chain(std::string_view name) const;
  std::vector<double> pooled(std::string_view name) const;
  std::size_t total_draws() const;
  int divergences() const;
};

ChainOutput run_chain(const Target& target, const SamplerConfig& config, int chain_index);
PosteriorDraws run_chains(const Target& target, const SamplerConfig& config);
PosteriorDraws run_chains(const Posterior& posterior, const SamplerConfig& config);

/// CSV with header `chain,iteration,<names...>`, constrained scale,
/// round-trip precision. Names containing commas are quoted. Reading back
/// restores constrained draws only.
std::string draws_to_csv(const PosteriorDraws& draws);
PosteriorDraws draws_from_csv(std::string_view text);

}  // namespace metabayes
