#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "metabayes/data.hpp"

namespace metabayes {

// ---------------------------------------------------------------------------
// Links
// ---------------------------------------------------------------------------

enum class LinkKind { logit, identity, log };

/// binary -> logit, continuous -> identity, count -> log.
LinkKind link_for(Endpoint endpoint);
std::string_view to_string(LinkKind kind);

double link(LinkKind kind, double value);
double inverse_link(LinkKind kind, double eta);

// ---------------------------------------------------------------------------
// Dose-response families
// ---------------------------------------------------------------------------

enum class DoseResponseKind { linear, log_linear, emax, sigmoidal };

std::string_view to_string(DoseResponseKind kind);
DoseResponseKind dose_response_from_string(std::string_view name);

/// Parameter roles of a family: {"alpha"}, {"Emax", "ED50"} or {"Emax", "ED50", "n"}.
std::vector<std::string> dose_response_roles(DoseResponseKind kind);

/// Parameters in natural units. `slope` is alpha (linear families) or Emax.
struct DoseResponseParams {
  double slope = 0.0;
  double ed50 = 1.0;
  double hill = 1.0;
};

/// f(dose) and its partials with respect to slope, log(ED50) and log(n).
struct DoseResponseValue {
  double value = 0.0;
  double d_slope = 0.0;
  double d_log_ed50 = 0.0;
  double d_log_hill = 0.0;
};

DoseResponseValue dose_response(DoseResponseKind kind, const DoseResponseParams& params, double dose);

/// Role-keyed evaluation; throws ConfigError when a role is missing and
/// DomainError for ED50 <= 0 or n <= 0.
double dose_response_eval(DoseResponseKind kind, const std::map<std::string, double>& params, double dose);

// ---------------------------------------------------------------------------
// Priors
// ---------------------------------------------------------------------------

enum class PriorFamily { normal, half_normal, cauchy, uniform, log_normal, functional_ed50 };

/// A prior distribution. Meaning of `a`/`b` depends on the family:
/// normal(mean, sd), half_normal(scale), cauchy(location, scale) truncated to
/// the positive half-line when placed on a positive parameter,
/// uniform(lower, upper), log_normal(meanlog, sdlog), functional_ed50 (none).
struct PriorSpec {
  PriorFamily family = PriorFamily::normal;
  double a = 0.0;
  double b = 1.0;

  static PriorSpec normal(double mean, double sd) { return {PriorFamily::normal, mean, sd}; }
  static PriorSpec half_normal(double scale) { return {PriorFamily::half_normal, 0.0, scale}; }
  static PriorSpec cauchy(double location, double scale) { return {PriorFamily::cauchy, location, scale}; }
  static PriorSpec uniform(double lower, double upper) { return {PriorFamily::uniform, lower, upper}; }
  static PriorSpec log_normal(double meanlog, double sdlog) { return {PriorFamily::log_normal, meanlog, sdlog}; }
  static PriorSpec functional_ed50() { return {PriorFamily::functional_ed50, -2.5, 1.8}; }

  void validate() const;
  /// Printed form, e.g. "Normal(0,2.5)", "half-normal(0.5)", "functional(-2.5,1.8)".
  std::string label() const;

  bool operator==(const PriorSpec&) const = default;
};

struct Priors {
  std::optional<PriorSpec> mu;
  std::optional<PriorSpec> theta;
  std::optional<PriorSpec> beta;
  std::optional<PriorSpec> tau;
  std::optional<PriorSpec> slope;  // alpha or Emax
  std::optional<PriorSpec> ed50;
  std::optional<PriorSpec> hill;

  bool operator==(const Priors&) const = default;
};

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

enum class ModelFamily { pairwise, meta_regression, mbma };
enum class Parametrization { symmetric, baseline_contrast };

std::string_view to_string(ModelFamily family);
std::string_view to_string(Parametrization parametrization);

struct ModelSpec {
  ModelFamily family = ModelFamily::pairwise;
  Endpoint endpoint = Endpoint::binary;
  bool random_effects = true;
  /// Unset means symmetric for pairwise models; MBMA is always baseline-contrast.
  std::optional<Parametrization> parametrization;
  bool non_centered = true;
  /// n_studies x p study-level covariates (meta-regression only).
  std::vector<std::vector<double>> covariates;
  std::optional<DoseResponseKind> dose_response;
  Priors priors;
  /// D in the functional ED50 prior; defaults to the dataset's largest dose.
  std::optional<double> max_dose;

  Parametrization effective_parametrization() const;
  std::size_t n_covariates() const { return covariates.empty() ? 0 : covariates.front().size(); }

  /// Checks the model spec against a dataset; throws ConfigError on mismatch.
  void validate(const Dataset& dataset) const;

  bool operator==(const ModelSpec&) const = default;
};

/// Returns `priors` with every unset entry filled by the package defaults.
Priors default_priors(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Linear predictor
// ---------------------------------------------------------------------------

/// Weight w with which the study contrast (d + x'beta + gamma) enters the arm:
/// -0.5/+0.5 for the symmetric coding, 0/1 for baseline-contrast and MBMA.
double contrast_weight(const ModelSpec& spec, int arm_index);

struct PredictorInputs {
  double mu = 0.0;
  double d = 0.0;
  std::span<const double> beta;
  std::span<const double> covariates;
  /// Random effect of this arm (gamma, or the non-centered L * u * tau term).
  double gamma = 0.0;
  DoseResponseParams dose_response;
};

double linear_predictor(const ModelSpec& spec, const ArmRecord& arm, const PredictorInputs& inputs);

// ---------------------------------------------------------------------------
// Multi-arm random-effect covariance
// ---------------------------------------------------------------------------

/// Dense row-major square matrix; small sizes only.
struct SquareMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  explicit SquareMatrix(std::size_t size = 0) : n(size), values(size * size, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// Compound-symmetric covariance with tau^2 on the diagonal and tau^2/2 off it.
SquareMatrix sigma_gamma(double tau, std::size_t n_treatment_arms);

/// Lower-triangular L with L * L' = sigma_gamma(tau, n).
SquareMatrix sigma_gamma_cholesky(double tau, std::size_t n_treatment_arms);

/// Plain Cholesky factorisation; throws DomainError if not positive definite.
SquareMatrix cholesky(const SquareMatrix& a);

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

nlohmann::json prior_to_json(const PriorSpec& prior);
PriorSpec prior_from_json(const nlohmann::json& j);

nlohmann::json model_spec_to_json(const ModelSpec& spec);
/// Strict: unknown keys raise ConfigError.
ModelSpec model_spec_from_json(const nlohmann::json& j);

}  // namespace metabayes
