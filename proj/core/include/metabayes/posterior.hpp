#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "metabayes/data.hpp"
#include "metabayes/model.hpp"

namespace metabayes {

/// How an unconstrained coordinate maps onto its natural scale.
enum class Transform {
  identity,
  exp,      // x = e^z, positive parameters
  bounded,  // x = lower + (upper - lower) * logistic(z)
};

struct ParameterBlock {
  std::string name;  // unconstrained block name, e.g. "log_tau"
  std::size_t offset = 0;
  std::size_t length = 0;
  Transform transform = Transform::identity;
  double lower = 0.0;
  double upper = 0.0;
  /// Constrained-scale names of the block's entries, e.g. "tau" or "mu[3]".
  std::vector<std::string> labels;
};

/// Ordered parameter blocks of the unconstrained space:
/// mu, theta, beta, slope (alpha|Emax), log_ED50, log_n, log_tau|logit_tau, u|gamma.
class ParameterLayout {
 public:
  static ParameterLayout build(const ModelSpec& spec, const Dataset& dataset, const Priors& priors);

  std::span<const ParameterBlock> blocks() const noexcept { return blocks_; }
  const ParameterBlock* find(std::string_view name) const;
  std::size_t dimension() const noexcept { return dimension_; }

  /// Constrained names in layout order (one per coordinate).
  std::vector<std::string> constrained_names() const;
  /// Name of the block owning unconstrained coordinate `index`.
  const std::string& block_of(std::size_t index) const;

  std::vector<double> constrain(std::span<const double> z) const;
  std::vector<double> unconstrain(std::span<const double> x) const;

 private:
  ParameterBlock& add(std::string name, std::size_t length, Transform transform);

  std::vector<ParameterBlock> blocks_;
  std::size_t dimension_ = 0;
};

struct LogDensityResult {
  double log_density = 0.0;
  std::vector<double> gradient;
};

/// Sum of the per-arm log-likelihood kernels for linear predictors `eta`
/// (one per arm, dataset order). The binomial coefficient and Poisson y!
/// are dropped.
double log_likelihood(const Dataset& dataset, std::span<const double> eta);

/// Log posterior on the unconstrained space of a (ModelSpec, Dataset) pair,
/// including transform Jacobians, with its analytic gradient.
///
/// Construction fills default priors and validates the model spec. Evaluation is
/// const and holds no mutable state, so one instance may be shared across
/// threads.
class Posterior {
 public:
  Posterior(ModelSpec spec, Dataset dataset);

  const ModelSpec& spec() const noexcept { return spec_; }
  const Dataset& dataset() const noexcept { return dataset_; }
  const Priors& priors() const noexcept { return priors_; }
  const ParameterLayout& layout() const noexcept { return layout_; }
  std::size_t dimension() const noexcept { return layout_.dimension(); }
  /// D used by the functional ED50 prior (MBMA only).
  double max_dose() const noexcept { return max_dose_; }

  /// Density and gradient; may return non-finite values for extreme z.
  LogDensityResult evaluate(std::span<const double> z) const;
  /// As evaluate(), but throws DomainError naming the block where a
  /// non-finite value appeared.
  LogDensityResult log_posterior_and_gradient(std::span<const double> z) const;
  double log_density(std::span<const double> z) const;

  double log_likelihood(std::span<const double> z) const;
  /// Prior terms including Jacobians and the latent-effect density.
  double log_prior(std::span<const double> z) const;

  /// Linear predictor of every arm, dataset order.
  std::vector<double> linear_predictors(std::span<const double> z) const;
  /// Random-effect term of every arm's linear predictor, dataset order: the
  /// contrast weight times gamma for pairwise codings, gamma[i,j] for MBMA.
  std::vector<double> arm_random_effects(std::span<const double> z) const;

 private:
  struct Terms {
    double log_likelihood = 0.0;
    double log_prior = 0.0;
  };
  Terms compute(std::span<const double> z, double* gradient, double* eta_out, double* gamma_out) const;

  ModelSpec spec_;
  Dataset dataset_;
  Priors priors_;
  ParameterLayout layout_;
  double max_dose_ = 0.0;

  std::vector<std::size_t> latent_offsets_;  // first latent coordinate of each study
  std::map<std::size_t, SquareMatrix> unit_cholesky_;  // by number of treatment arms
  std::map<std::size_t, double> unit_log_det_;

  // Cached block offsets; npos when absent.
  std::size_t mu_ = 0, theta_, beta_, slope_, ed50_, hill_, tau_, latent_;
};

}  // namespace metabayes
