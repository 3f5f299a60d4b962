#include "metabayes/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "metabayes/error.hpp"

namespace metabayes {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr double kMaxEnergyError = 1000.0;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

int steps_for(double step_size, const SamplerConfig& config) {
  const double raw = std::round(config.integration_time / step_size);
  if (!(raw >= 1.0)) return 1;
  return static_cast<int>(std::min<double>(raw, config.max_leapfrog_steps));
}

// Running mean/variance (Welford).
class VarianceEstimator {
 public:
  explicit VarianceEstimator(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}
  void add(std::span<const double> x) {
    ++n_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean_[i];
      mean_[i] += delta / static_cast<double>(n_);
      m2_[i] += delta * (x[i] - mean_[i]);
    }
  }
  std::size_t count() const { return n_; }
  // Sample variance shrunk toward 1e-3, as in Stan's diagonal adaptation.
  std::vector<double> regularized() const {
    const double n = static_cast<double>(n_);
    std::vector<double> out(mean_.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double var = n > 1 ? m2_[i] / (n - 1.0) : 1.0;
      out[i] = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0));
    }
    return out;
  }
  void reset() {
    n_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> mean_, m2_;
};

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Quotes a header field that contains a separator, e.g. "u[1,2]".
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

// ---------------------------------------------------------------------------

Rng Rng::for_chain(std::uint64_t seed, std::uint64_t chain) {
  return Rng(splitmix64(splitmix64(seed) ^ (0xD6E8FEB86659FD93ULL * (chain + 1))));
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

int Rng::uniform_int(int lo, int hi) {
  const double span = static_cast<double>(hi) - static_cast<double>(lo) + 1.0;
  return lo + std::min(static_cast<int>(uniform() * span), hi - lo);
}

void SamplerConfig::validate() const {
  if (chains < 1) throw ConfigError("chains must be at least 1");
  if (warmup < 0 || iter <= warmup) throw ConfigError("need 0 <= warmup < iter");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target_accept must lie in (0, 1)");
  if (max_leapfrog_steps < 1) throw ConfigError("max_leapfrog_steps must be at least 1");
  if (!(init_radius >= 0.0)) throw ConfigError("init_radius must be non-negative");
  if (!(integration_time > 0.0)) throw ConfigError("integration_time must be positive");
  if (threads < 0) throw ConfigError("threads must be non-negative");
}

Target make_target(const Posterior& posterior) {
  Target t;
  t.dimension = posterior.dimension();
  t.log_density = [&posterior](std::span<const double> z) { return posterior.evaluate(z); };
  t.constrain = [&posterior](std::span<const double> z) { return posterior.layout().constrain(z); };
  t.names = posterior.layout().constrained_names();
  return t;
}

// ---------------------------------------------------------------------------

PhasePoint make_point(const LogDensityFn& fn, std::vector<double> z) {
  LogDensityResult r = fn(z);
  return PhasePoint{std::move(z), r.log_density, std::move(r.gradient)};
}

double kinetic_energy(std::span<const double> momentum, std::span<const double> inv_mass) {
  double k = 0.0;
  for (std::size_t i = 0; i < momentum.size(); ++i) k += momentum[i] * momentum[i] * inv_mass[i];
  return 0.5 * k;
}

bool leapfrog(PhasePoint& point, std::vector<double>& p, double eps, int n_steps, const LogDensityFn& fn,
              std::span<const double> inv_mass) {
  const std::size_t dim = point.z.size();
  for (int step = 0; step < n_steps; ++step) {
    for (std::size_t i = 0; i < dim; ++i) p[i] += 0.5 * eps * point.gradient[i];
    for (std::size_t i = 0; i < dim; ++i) point.z[i] += eps * inv_mass[i] * p[i];
    LogDensityResult r = fn(point.z);
    point.log_density = r.log_density;
    point.gradient = std::move(r.gradient);
    if (!std::isfinite(point.log_density) || !all_finite(point.gradient)) return false;
    for (std::size_t i = 0; i < dim; ++i) p[i] += 0.5 * eps * point.gradient[i];
  }
  return all_finite(point.z) && all_finite(p);
}

Transition hmc_transition(const PhasePoint& current, double eps, std::span<const double> inv_mass, int max_steps,
                          const LogDensityFn& fn, Rng& rng) {
  const std::size_t dim = current.z.size();
  std::vector<double> p(dim);
  for (std::size_t i = 0; i < dim; ++i) p[i] = rng.normal() / std::sqrt(inv_mass[i]);
  const double h0 = -current.log_density + kinetic_energy(p, inv_mass);

  Transition out;
  out.n_steps = rng.uniform_int(1, std::max(1, max_steps));
  PhasePoint proposal = current;
  double delta = 0.0;
  double stat_sum = 0.0;
  bool finite = true;
  for (int step = 0; step < out.n_steps && finite; ++step) {
    finite = leapfrog(proposal, p, eps, 1, fn, inv_mass);
    delta = finite ? -proposal.log_density + kinetic_energy(p, inv_mass) - h0
                   : std::numeric_limits<double>::infinity();
    stat_sum += std::isfinite(delta) ? std::min(1.0, std::exp(-delta)) : 0.0;
  }
  out.accept_stat = stat_sum / static_cast<double>(out.n_steps);
  if (!finite || !std::isfinite(delta) || delta > kMaxEnergyError) {
    out.divergent = true;
    out.accept_prob = 0.0;
    out.point = current;
    return out;
  }
  out.accept_prob = delta <= 0.0 ? 1.0 : std::exp(-delta);
  out.point = rng.uniform() < out.accept_prob ? std::move(proposal) : current;
  return out;
}

// ---------------------------------------------------------------------------

StepSizeAdapter::StepSizeAdapter(double target_accept, double initial_step) : target_(target_accept) {
  restart(initial_step);
}

void StepSizeAdapter::restart(double initial_step) {
  mu_ = std::log(10.0 * initial_step);
  h_bar_ = 0.0;
  log_step_ = std::log(initial_step);
  log_step_bar_ = 0.0;
  count_ = 0;
}

double StepSizeAdapter::update(double accept_prob) {
  constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  ++count_;
  const double t = static_cast<double>(count_);
  const double eta = 1.0 / (t + t0);
  h_bar_ = (1.0 - eta) * h_bar_ + eta * (target_ - accept_prob);
  log_step_ = mu_ - std::sqrt(t) / gamma * h_bar_;
  const double weight = std::pow(t, -kappa);
  log_step_bar_ = weight * log_step_ + (1.0 - weight) * log_step_bar_;
  return std::exp(log_step_);
}

double StepSizeAdapter::final_step() const { return std::exp(count_ > 0 ? log_step_bar_ : log_step_); }

double find_reasonable_step_size(const PhasePoint& point, double eps, std::span<const double> inv_mass,
                                 const LogDensityFn& fn, Rng& rng) {
  const std::size_t dim = point.z.size();
  auto log_accept = [&](double step) {
    std::vector<double> p(dim);
    for (std::size_t i = 0; i < dim; ++i) p[i] = rng.normal() / std::sqrt(inv_mass[i]);
    const double h0 = -point.log_density + kinetic_energy(p, inv_mass);
    PhasePoint q = point;
    if (!leapfrog(q, p, step, 1, fn, inv_mass)) return -std::numeric_limits<double>::infinity();
    const double h1 = -q.log_density + kinetic_energy(p, inv_mass);
    return std::isfinite(h1) ? h0 - h1 : -std::numeric_limits<double>::infinity();
  };
  const double log_half = std::log(0.5);
  const int direction = log_accept(eps) > log_half ? 1 : -1;
  for (int k = 0; k < 100; ++k) {
    const double next = direction > 0 ? 2.0 * eps : 0.5 * eps;
    const double la = log_accept(next);
    const bool keep_going = direction > 0 ? la > log_half : la < log_half;
    if (!keep_going) {
      // Growing: keep the last step that still passed. Shrinking: take the first that passes.
      return direction > 0 ? eps : next;
    }
    eps = next;
    if (eps > 1e7 || eps < 1e-10) break;
  }
  return eps;
}

WarmupResult adapt_warmup(const LogDensityFn& fn, PhasePoint start, const SamplerConfig& config, Rng& rng) {
  const std::size_t dim = start.z.size();
  WarmupResult result;
  result.inv_mass.assign(dim, 1.0);
  result.point = std::move(start);

  double eps = find_reasonable_step_size(result.point, 1.0, result.inv_mass, fn, rng);
  StepSizeAdapter adapter(config.target_accept, eps);

  const int warmup = config.warmup;
  int init_buffer = warmup, term_buffer = 0, window = 0;
  if (warmup >= 150) {
    const double scale = warmup / 1000.0;
    init_buffer = std::max(1, static_cast<int>(std::lround(75 * scale)));
    term_buffer = std::max(1, static_cast<int>(std::lround(50 * scale)));
    window = std::max(1, static_cast<int>(std::lround(25 * scale)));
    result.mass_adapted = true;
  } else if (warmup > 0) {
    result.warnings.push_back("warmup of " + std::to_string(warmup) +
                              " iterations is too short for metric adaptation; adapting the step size only");
  }
  const int slow_end = warmup - term_buffer;
  int window_end = init_buffer + window;
  if (result.mass_adapted && window_end + 2 * window > slow_end) window_end = slow_end;

  VarianceEstimator estimator(dim);
  for (int t = 0; t < warmup; ++t) {
    Transition tr = hmc_transition(result.point, eps, result.inv_mass, steps_for(eps, config), fn, rng);
    result.point = std::move(tr.point);
    ++result.transitions;
    if (tr.divergent) ++result.divergences;
    eps = adapter.update(tr.accept_stat);

    if (!result.mass_adapted || t < init_buffer || t >= slow_end) continue;
    estimator.add(result.point.z);
    if (t + 1 == window_end) {
      result.inv_mass = estimator.regularized();
      estimator.reset();
      eps = find_reasonable_step_size(result.point, eps, result.inv_mass, fn, rng);
      adapter.restart(eps);
      window *= 2;
      window_end = t + 1 + window;
      if (window_end + 2 * window > slow_end) window_end = slow_end;
    }
  }
  result.step_size = warmup > 0 ? adapter.final_step() : eps;
  if (!std::isfinite(result.step_size) || result.step_size <= 0.0) result.step_size = eps;
  return result;
}

// ---------------------------------------------------------------------------

std::vector<double> ChainOutput::constrained_column(std::size_t index) const {
  std::vector<double> col;
  const std::size_t n = constrained_draws.size() / dimension;
  col.reserve(n);
  for (std::size_t r = 0; r < n; ++r) col.push_back(constrained_draws[r * dimension + index]);
  return col;
}

std::size_t PosteriorDraws::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

bool PosteriorDraws::has(std::string_view name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<std::vector<double>> PosteriorDraws::per_chain(std::string_view name) const {
  const std::size_t index = index_of(name);
  std::vector<std::vector<double>> out;
  for (const auto& c : chains) out.push_back(c.constrained_column(index));
  return out;
}

std::vector<double> PosteriorDraws::pooled(std::string_view name) const {
  std::vector<double> all;
  for (auto& c : per_chain(name)) all.insert(all.end(), c.begin(), c.end());
  return all;
}

std::size_t PosteriorDraws::total_draws() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.dimension == 0 ? 0 : c.constrained_draws.size() / c.dimension;
  return n;
}

int PosteriorDraws::divergences() const {
  int n = 0;
  for (const auto& c : chains) n += c.divergences;
  return n;
}

ChainOutput run_chain(const Target& target, const SamplerConfig& config, int chain_index) {
  config.validate();
  Rng rng = Rng::for_chain(config.seed, static_cast<std::uint64_t>(chain_index));
  const std::size_t dim = target.dimension;

  PhasePoint point;
  bool initialized = false;
  for (int attempt = 0; attempt < 100 && !initialized; ++attempt) {
    std::vector<double> z(dim);
    for (double& v : z) v = rng.uniform(-config.init_radius, config.init_radius);
    point = make_point(target.log_density, std::move(z));
    initialized = std::isfinite(point.log_density) && all_finite(point.gradient);
  }
  if (!initialized) {
    throw SamplingError("chain " + std::to_string(chain_index + 1) +
                        ": no finite initial point in 100 attempts; try a smaller init_radius");
  }

  WarmupResult warm = adapt_warmup(target.log_density, std::move(point), config, rng);
  if (warm.transitions > 0 && warm.divergences == warm.transitions) {
    throw SamplingError("chain " + std::to_string(chain_index + 1) +
                        ": every warmup transition diverged; use the non-centered parametrization or a smaller "
                        "init_radius");
  }

  ChainOutput out;
  out.dimension = dim;
  out.step_size = warm.step_size;
  out.inv_mass = warm.inv_mass;
  out.warmup_divergences = warm.divergences;
  out.warnings = warm.warnings;
  const int n_draws = config.iter - config.warmup;
  out.draws.reserve(static_cast<std::size_t>(n_draws) * dim);
  out.constrained_draws.reserve(static_cast<std::size_t>(n_draws) * dim);
  out.accept_stats.reserve(static_cast<std::size_t>(n_draws));

  const int max_steps = steps_for(out.step_size, config);
  PhasePoint current = std::move(warm.point);
  for (int it = 0; it < n_draws; ++it) {
    Transition tr = hmc_transition(current, out.step_size, out.inv_mass, max_steps, target.log_density, rng);
    current = std::move(tr.point);
    if (tr.divergent) ++out.divergences;
    out.accept_stats.push_back(tr.accept_stat);
    out.draws.insert(out.draws.end(), current.z.begin(), current.z.end());
    std::vector<double> x = target.constrain ? target.constrain(current.z) : current.z;
    out.constrained_draws.insert(out.constrained_draws.end(), x.begin(), x.end());
  }
  return out;
}

PosteriorDraws run_chains(const Target& target, const SamplerConfig& config) {
  config.validate();
  PosteriorDraws result;
  result.names = target.names;
  if (result.names.empty()) {
    for (std::size_t i = 0; i < target.dimension; ++i) result.names.push_back("z[" + std::to_string(i + 1) + "]");
  }
  result.chains.resize(static_cast<std::size_t>(config.chains));

  const int workers = std::min(config.chains, config.threads > 0 ? config.threads : config.chains);
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto work = [&] {
    for (int c = next++; c < config.chains; c = next++) {
      try {
        result.chains[static_cast<std::size_t>(c)] = run_chain(target, config, c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return result;
}

PosteriorDraws run_chains(const Posterior& posterior, const SamplerConfig& config) {
  return run_chains(make_target(posterior), config);
}

// ---------------------------------------------------------------------------

std::string draws_to_csv(const PosteriorDraws& draws) {
  std::string out = "chain,iteration";
  for (const auto& name : draws.names) out += "," + csv_field(name);
  out += '\n';
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const ChainOutput& chain = draws.chains[c];
    const std::size_t n = chain.dimension == 0 ? 0 : chain.constrained_draws.size() / chain.dimension;
    for (std::size_t r = 0; r < n; ++r) {
      out += std::to_string(c + 1) + "," + std::to_string(r + 1);
      for (std::size_t k = 0; k < chain.dimension; ++k) {
        out += ',';
        out += format_double(chain.constrained_draws[r * chain.dimension + k]);
      }
      out += '\n';
    }
  }
  return out;
}

PosteriorDraws draws_from_csv(std::string_view text) {
  WideTable table = parse_csv(text);
  if (table.columns.size() < 3 || table.columns[0] != "chain" || table.columns[1] != "iteration") {
    throw ParseError("draws file must start with columns chain,iteration", 1);
  }
  PosteriorDraws draws;
  draws.names.assign(table.columns.begin() + 2, table.columns.end());
  const std::size_t dim = draws.names.size();
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    const auto chain = table.number(r, "chain");
    if (!chain || *chain < 1) throw ParseError("draws row " + std::to_string(r + 2) + " has no chain index", static_cast<long>(r + 2));
    const std::size_t c = static_cast<std::size_t>(*chain) - 1;
    if (c >= draws.chains.size()) {
      if (c != draws.chains.size()) throw ParseError("draws file chains must be numbered 1, 2, ... in order", static_cast<long>(r + 2));
      draws.chains.emplace_back();
      draws.chains.back().dimension = dim;
    }
    for (std::size_t k = 0; k < dim; ++k) {
      const auto* v = std::get_if<double>(&table.rows[r][k + 2]);
      if (!v) throw ParseError("draws row " + std::to_string(r + 2) + " is missing a value", static_cast<long>(r + 2));
      draws.chains[c].constrained_draws.push_back(*v);
    }
  }
  return draws;
}

}  // namespace metabayes
