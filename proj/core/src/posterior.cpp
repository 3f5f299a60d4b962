#include "metabayes/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "metabayes/error.hpp"

namespace metabayes {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
constexpr double kHalfLog2Pi = 0.91893853320467274178;

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double logistic(double x) { return inverse_link(LinkKind::logit, x); }

// log N(x | m, s) and its derivative in x.
double normal_lpdf(double x, double m, double s) {
  const double r = (x - m) / s;
  return -kHalfLog2Pi - std::log(s) - 0.5 * r * r;
}
double normal_dx(double x, double m, double s) { return -(x - m) / (s * s); }

double log_std_normal_cdf(double x) { return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2)); }

// Prior density of a positive parameter v (natural scale) and d/dv.
struct PositivePrior {
  double log_density;
  double d_value;
};

PositivePrior positive_prior(const PriorSpec& prior, double v) {
  switch (prior.family) {
    case PriorFamily::half_normal:
      return {std::numbers::ln2 + normal_lpdf(v, 0.0, prior.b), normal_dx(v, 0.0, prior.b)};
    case PriorFamily::normal:  // truncated to (0, inf)
      return {normal_lpdf(v, prior.a, prior.b) - log_std_normal_cdf(prior.a / prior.b), normal_dx(v, prior.a, prior.b)};
    case PriorFamily::cauchy: {  // truncated to (0, inf)
      const double r = v - prior.a;
      const double s = prior.b;
      const double mass = 0.5 + std::atan(prior.a / s) / std::numbers::pi;
      return {-std::log(std::numbers::pi * s) - std::log1p((r / s) * (r / s)) - std::log(mass),
              -2.0 * r / (s * s + r * r)};
    }
    case PriorFamily::uniform:
      if (v < prior.a || v > prior.b) return {-std::numeric_limits<double>::infinity(), 0.0};
      return {-std::log(prior.b - prior.a), 0.0};
    case PriorFamily::log_normal:
      return {normal_lpdf(std::log(v), prior.a, prior.b) - std::log(v),
              (normal_dx(std::log(v), prior.a, prior.b) - 1.0) / v};
    case PriorFamily::functional_ed50:
      break;
  }
  throw ConfigError("prior " + prior.label() + " cannot be placed on a positive parameter");
}

// Value, d value/dz and log-Jacobian (with its z-derivative) of a transform.
struct Transformed {
  double value;
  double d_value;
  double log_jacobian;
  double d_log_jacobian;
};

Transformed apply_transform(const ParameterBlock& block, double z) {
  switch (block.transform) {
    case Transform::identity:
      return {z, 1.0, 0.0, 0.0};
    case Transform::exp: {
      const double v = std::exp(z);
      return {v, v, z, 1.0};
    }
    case Transform::bounded: {
      const double width = block.upper - block.lower;
      const double sig = logistic(z);
      return {block.lower + width * sig, width * sig * (1.0 - sig), std::log(width) - softplus(-z) - softplus(z),
              1.0 - 2.0 * sig};
    }
  }
  return {z, 1.0, 0.0, 0.0};
}

}  // namespace

// ---------------------------------------------------------------------------

ParameterBlock& ParameterLayout::add(std::string name, std::size_t length, Transform transform) {
  ParameterBlock block;
  block.name = std::move(name);
  block.offset = dimension_;
  block.length = length;
  block.transform = transform;
  dimension_ += length;
  blocks_.push_back(std::move(block));
  return blocks_.back();
}

ParameterLayout ParameterLayout::build(const ModelSpec& spec, const Dataset& dataset, const Priors& priors) {
  ParameterLayout layout;
  const std::size_t k = dataset.n_studies();

  auto& mu = layout.add("mu", k, Transform::identity);
  for (std::size_t i = 0; i < k; ++i) mu.labels.push_back("mu[" + std::to_string(i + 1) + "]");

  if (spec.family == ModelFamily::mbma) {
    const DoseResponseKind kind = spec.dose_response.value();
    const bool linear = kind == DoseResponseKind::linear || kind == DoseResponseKind::log_linear;
    layout.add(linear ? "alpha" : "Emax", 1, Transform::identity).labels = {linear ? "alpha" : "Emax"};
    if (!linear) layout.add("log_ED50", 1, Transform::exp).labels = {"ED50"};
    if (kind == DoseResponseKind::sigmoidal) layout.add("log_n", 1, Transform::exp).labels = {"n"};
  } else {
    layout.add("theta", 1, Transform::identity).labels = {"theta"};
    if (spec.family == ModelFamily::meta_regression) {
      auto& beta = layout.add("beta", spec.n_covariates(), Transform::identity);
      for (std::size_t j = 0; j < spec.n_covariates(); ++j) beta.labels.push_back("beta[" + std::to_string(j + 1) + "]");
    }
  }

  if (spec.random_effects) {
    const PriorSpec& tau_prior = priors.tau.value();
    if (tau_prior.family == PriorFamily::uniform) {
      auto& tau = layout.add("logit_tau", 1, Transform::bounded);
      tau.lower = tau_prior.a;
      tau.upper = tau_prior.b;
      tau.labels = {"tau"};
    } else {
      layout.add("log_tau", 1, Transform::exp).labels = {"tau"};
    }

    const std::string latent = spec.non_centered ? "u" : "gamma";
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < k; ++i) {
      auto arms = dataset.study_arms(i);
      if (spec.family != ModelFamily::mbma) {
        labels.push_back(latent + "[" + std::to_string(i + 1) + "]");
        continue;
      }
      for (std::size_t a = 1; a < arms.size(); ++a) {
        labels.push_back(latent + "[" + std::to_string(i + 1) + "," + std::to_string(a) + "]");
      }
    }
    auto& block = layout.add(latent, labels.size(), Transform::identity);
    block.labels = std::move(labels);
  }
  return layout;
}

const ParameterBlock* ParameterLayout::find(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

std::vector<std::string> ParameterLayout::constrained_names() const {
  std::vector<std::string> names;
  names.reserve(dimension_);
  for (const auto& b : blocks_) names.insert(names.end(), b.labels.begin(), b.labels.end());
  return names;
}

const std::string& ParameterLayout::block_of(std::size_t index) const {
  for (const auto& b : blocks_) {
    if (index >= b.offset && index < b.offset + b.length) return b.name;
  }
  throw ConfigError("coordinate " + std::to_string(index) + " is outside the parameter layout");
}

std::vector<double> ParameterLayout::constrain(std::span<const double> z) const {
  if (z.size() != dimension_) throw ConfigError("unconstrained vector has the wrong dimension");
  std::vector<double> x(z.begin(), z.end());
  for (const auto& b : blocks_) {
    for (std::size_t i = b.offset; i < b.offset + b.length; ++i) x[i] = apply_transform(b, z[i]).value;
  }
  return x;
}

std::vector<double> ParameterLayout::unconstrain(std::span<const double> x) const {
  if (x.size() != dimension_) throw ConfigError("constrained vector has the wrong dimension");
  std::vector<double> z(x.begin(), x.end());
  for (const auto& b : blocks_) {
    for (std::size_t i = b.offset; i < b.offset + b.length; ++i) {
      switch (b.transform) {
        case Transform::identity: break;
        case Transform::exp:
          if (!(x[i] > 0.0)) throw DomainError(b.labels.front() + " must be positive");
          z[i] = std::log(x[i]);
          break;
        case Transform::bounded: {
          const double p = (x[i] - b.lower) / (b.upper - b.lower);
          if (!(p > 0.0 && p < 1.0)) throw DomainError(b.labels.front() + " must lie strictly inside its bounds");
          z[i] = std::log(p) - std::log1p(-p);
          break;
        }
      }
    }
  }
  return z;
}

// ---------------------------------------------------------------------------

double log_likelihood(const Dataset& dataset, std::span<const double> eta) {
  if (eta.size() != dataset.n_arms()) throw ConfigError("need one linear predictor per arm");
  double total = 0.0;
  auto arms = dataset.arms();
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const double e = eta[a];
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, BinaryOutcome>) {
            total += static_cast<double>(o.responders) * e - static_cast<double>(o.sample_size) * softplus(e);
          } else if constexpr (std::is_same_v<T, ContinuousOutcome>) {
            total += normal_lpdf(o.mean, e, o.std_err);
          } else {
            total += static_cast<double>(o.events) * (e + std::log(o.exposure)) - o.exposure * std::exp(e);
          }
        },
        arms[a].outcome);
  }
  return total;
}

Posterior::Posterior(ModelSpec spec, Dataset dataset) : spec_(std::move(spec)), dataset_(std::move(dataset)) {
  spec_.validate(dataset_);
  priors_ = default_priors(spec_);
  if (spec_.family == ModelFamily::mbma) max_dose_ = spec_.max_dose.value_or(dataset_.max_dose());
  layout_ = ParameterLayout::build(spec_, dataset_, priors_);

  auto offset_of = [&](std::string_view name) {
    const ParameterBlock* b = layout_.find(name);
    return b ? b->offset : npos;
  };
  mu_ = offset_of("mu");
  theta_ = offset_of("theta");
  beta_ = offset_of("beta");
  slope_ = spec_.family == ModelFamily::mbma ? std::min(offset_of("alpha"), offset_of("Emax")) : npos;
  ed50_ = offset_of("log_ED50");
  hill_ = offset_of("log_n");
  tau_ = std::min(offset_of("log_tau"), offset_of("logit_tau"));
  latent_ = std::min(offset_of("u"), offset_of("gamma"));

  std::size_t next = 0;
  for (std::size_t s = 0; s < dataset_.n_studies(); ++s) {
    latent_offsets_.push_back(next);
    const std::size_t m = dataset_.study_arms(s).size() - 1;
    next += spec_.family == ModelFamily::mbma ? m : 1;
    if (spec_.family == ModelFamily::mbma && m > 1 && !unit_cholesky_.count(m)) {
      SquareMatrix l = sigma_gamma_cholesky(1.0, m);
      double log_det = 0.0;
      for (std::size_t i = 0; i < m; ++i) log_det += std::log(l(i, i));
      unit_cholesky_.emplace(m, std::move(l));
      unit_log_det_.emplace(m, log_det);
    }
  }
}

Posterior::Terms Posterior::compute(std::span<const double> z, double* grad, double* eta_out, double* gamma_out) const {
  if (z.size() != layout_.dimension()) {
    throw ConfigError("unconstrained vector has dimension " + std::to_string(z.size()) + ", layout needs " +
                      std::to_string(layout_.dimension()));
  }
  if (grad) std::fill(grad, grad + z.size(), 0.0);
  Terms terms;
  const bool mbma = spec_.family == ModelFamily::mbma;
  const bool re = spec_.random_effects;
  const std::size_t p = spec_.n_covariates();

  const double d = theta_ != npos ? z[theta_] : 0.0;
  DoseResponseParams dr;
  if (mbma) {
    dr.slope = z[slope_];
    if (ed50_ != npos) dr.ed50 = std::exp(z[ed50_]);
    if (hill_ != npos) dr.hill = std::exp(z[hill_]);
  }

  Transformed tau{0.0, 0.0, 0.0, 0.0};
  if (re) {
    const ParameterBlock* tau_block = layout_.find("log_tau");
    if (!tau_block) tau_block = layout_.find("logit_tau");
    tau = apply_transform(*tau_block, z[tau_]);
  }
  double g_tau = 0.0;  // d log p / d tau on the natural scale

  std::vector<double> gamma, g_gamma, unit_effect, w;
  std::size_t arm_pos = 0;
  for (std::size_t s = 0; s < dataset_.n_studies(); ++s) {
    auto arms = dataset_.study_arms(s);
    const std::size_t m = mbma ? arms.size() - 1 : 1;
    const std::size_t lat = latent_ + (re ? latent_offsets_[s] : 0);
    const SquareMatrix* unit_l = nullptr;
    if (re && mbma && m > 1) unit_l = &unit_cholesky_.at(m);

    gamma.assign(m, 0.0);
    g_gamma.assign(m, 0.0);
    unit_effect.assign(m, 0.0);
    if (re) {
      if (!spec_.non_centered) {
        for (std::size_t k = 0; k < m; ++k) gamma[k] = z[lat + k];
      } else {
        // gamma = tau * L1 * u, L1 the Cholesky factor of the tau = 1 pattern.
        for (std::size_t r = 0; r < m; ++r) {
          double acc = z[lat + r];
          if (unit_l) {
            acc = 0.0;
            for (std::size_t c = 0; c <= r; ++c) acc += (*unit_l)(r, c) * z[lat + c];
          }
          unit_effect[r] = acc;
          gamma[r] = tau.value * acc;
        }
      }
    }

    double contrast = d;
    for (std::size_t j = 0; j < p; ++j) contrast += spec_.covariates[s][j] * z[beta_ + j];
    const double mu = z[mu_ + s];

    for (std::size_t a = 0; a < arms.size(); ++a, ++arm_pos) {
      const ArmRecord& arm = arms[a];
      double eta = mu;
      double weight = 0.0;
      DoseResponseValue f;
      if (mbma) {
        if (a > 0) {
          f = dose_response(*spec_.dose_response, dr, arm.dose.value_or(0.0));
          eta += f.value + gamma[a - 1];
        }
      } else {
        weight = contrast_weight(spec_, arm.arm);
        eta += weight * (contrast + gamma[0]);
      }
      if (eta_out) eta_out[arm_pos] = eta;
      if (gamma_out) gamma_out[arm_pos] = mbma ? (a > 0 ? gamma[a - 1] : 0.0) : weight * gamma[0];

      double ll = 0.0, g = 0.0;
      std::visit(
          [&](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, BinaryOutcome>) {
              const double y = static_cast<double>(o.responders), n = static_cast<double>(o.sample_size);
              ll = y * eta - n * softplus(eta);
              g = y - n * logistic(eta);
            } else if constexpr (std::is_same_v<T, ContinuousOutcome>) {
              ll = normal_lpdf(o.mean, eta, o.std_err);
              g = (o.mean - eta) / (o.std_err * o.std_err);
            } else {
              const double rate = o.exposure * std::exp(eta);
              ll = static_cast<double>(o.events) * (eta + std::log(o.exposure)) - rate;
              g = static_cast<double>(o.events) - rate;
            }
          },
          arm.outcome);
      terms.log_likelihood += ll;

      if (!grad) continue;
      grad[mu_ + s] += g;
      if (mbma) {
        if (a > 0) {
          grad[slope_] += g * f.d_slope;
          if (ed50_ != npos) grad[ed50_] += g * f.d_log_ed50;
          if (hill_ != npos) grad[hill_] += g * f.d_log_hill;
          g_gamma[a - 1] += g;
        }
      } else {
        grad[theta_] += weight * g;
        for (std::size_t j = 0; j < p; ++j) grad[beta_ + j] += weight * g * spec_.covariates[s][j];
        g_gamma[0] += weight * g;
      }
    }

    if (!re) continue;
    if (spec_.non_centered) {
      // Latent u ~ Normal(0, 1); gamma = tau * L1 * u.
      for (std::size_t k = 0; k < m; ++k) terms.log_prior += -kHalfLog2Pi - 0.5 * z[lat + k] * z[lat + k];
      if (!grad) continue;
      for (std::size_t k = 0; k < m; ++k) {
        g_tau += g_gamma[k] * unit_effect[k];
        double back = g_gamma[k];
        if (unit_l) {
          back = 0.0;
          for (std::size_t r = k; r < m; ++r) back += (*unit_l)(r, k) * g_gamma[r];
        }
        grad[lat + k] += tau.value * back - z[lat + k];
      }
    } else {
      // gamma ~ Normal(0, tau^2 C) with C the unit compound-symmetric pattern.
      const double t = tau.value;
      w.assign(gamma.begin(), gamma.end());
      double log_det = 0.0;
      if (unit_l) {
        for (std::size_t r = 0; r < m; ++r) {
          double acc = w[r];
          for (std::size_t c = 0; c < r; ++c) acc -= (*unit_l)(r, c) * w[c];
          w[r] = acc / (*unit_l)(r, r);
        }
        log_det = unit_log_det_.at(m);
      }
      double q = 0.0;
      for (double v : w) q += v * v;
      const double md = static_cast<double>(m);
      terms.log_prior += -md * kHalfLog2Pi - md * std::log(t) - log_det - 0.5 * q / (t * t);
      if (!grad) continue;
      g_tau += -md / t + q / (t * t * t);
      if (unit_l) {  // C^-1 gamma = L^-T w
        for (std::size_t r = m; r-- > 0;) {
          double acc = w[r];
          for (std::size_t c = r + 1; c < m; ++c) acc -= (*unit_l)(c, r) * w[c];
          w[r] = acc / (*unit_l)(r, r);
        }
      }
      for (std::size_t k = 0; k < m; ++k) grad[lat + k] += g_gamma[k] - w[k] / (t * t);
    }
  }

  // Priors on the remaining blocks.
  auto normal_block = [&](std::size_t offset, std::size_t length, const PriorSpec& prior) {
    for (std::size_t i = offset; i < offset + length; ++i) {
      terms.log_prior += normal_lpdf(z[i], prior.a, prior.b);
      if (grad) grad[i] += normal_dx(z[i], prior.a, prior.b);
    }
  };
  normal_block(mu_, dataset_.n_studies(), *priors_.mu);
  if (theta_ != npos) normal_block(theta_, 1, *priors_.theta);
  if (beta_ != npos) normal_block(beta_, p, *priors_.beta);
  if (slope_ != npos) normal_block(slope_, 1, *priors_.slope);

  if (ed50_ != npos) {
    const PriorSpec& prior = *priors_.ed50;
    // Both forms are a normal density on log ED50 once the exp Jacobian is included.
    const double x = prior.family == PriorFamily::functional_ed50 ? z[ed50_] - std::log(max_dose_) : z[ed50_];
    terms.log_prior += normal_lpdf(x, prior.a, prior.b);
    if (grad) grad[ed50_] += normal_dx(x, prior.a, prior.b);
  }
  if (hill_ != npos) {
    const double n = std::exp(z[hill_]);
    PositivePrior pp = positive_prior(*priors_.hill, n);
    terms.log_prior += pp.log_density + z[hill_];
    if (grad) grad[hill_] += pp.d_value * n + 1.0;
  }
  if (re) {
    PositivePrior pp = positive_prior(*priors_.tau, tau.value);
    terms.log_prior += pp.log_density + tau.log_jacobian;
    if (grad) grad[tau_] += (g_tau + pp.d_value) * tau.d_value + tau.d_log_jacobian;
  }
  return terms;
}

LogDensityResult Posterior::evaluate(std::span<const double> z) const {
  LogDensityResult out;
  out.gradient.resize(z.size());
  Terms t = compute(z, out.gradient.data(), nullptr, nullptr);
  out.log_density = t.log_likelihood + t.log_prior;
  return out;
}

LogDensityResult Posterior::log_posterior_and_gradient(std::span<const double> z) const {
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) throw DomainError("non-finite input in block '" + layout_.block_of(i) + "'");
  }
  LogDensityResult out = evaluate(z);
  for (std::size_t i = 0; i < out.gradient.size(); ++i) {
    if (!std::isfinite(out.gradient[i])) {
      throw DomainError("non-finite gradient in block '" + layout_.block_of(i) + "'");
    }
  }
  if (!std::isfinite(out.log_density)) {
    Terms t = compute(z, nullptr, nullptr, nullptr);
    throw DomainError(std::string("non-finite log density in ") + (std::isfinite(t.log_likelihood) ? "prior" : "likelihood"));
  }
  return out;
}

double Posterior::log_density(std::span<const double> z) const {
  Terms t = compute(z, nullptr, nullptr, nullptr);
  return t.log_likelihood + t.log_prior;
}

double Posterior::log_likelihood(std::span<const double> z) const {
  return compute(z, nullptr, nullptr, nullptr).log_likelihood;
}

double Posterior::log_prior(std::span<const double> z) const { return compute(z, nullptr, nullptr, nullptr).log_prior; }

std::vector<double> Posterior::linear_predictors(std::span<const double> z) const {
  std::vector<double> eta(dataset_.n_arms());
  compute(z, nullptr, eta.data(), nullptr);
  return eta;
}

std::vector<double> Posterior::arm_random_effects(std::span<const double> z) const {
  std::vector<double> gamma(dataset_.n_arms());
  compute(z, nullptr, nullptr, gamma.data());
  return gamma;
}

}  // namespace metabayes
