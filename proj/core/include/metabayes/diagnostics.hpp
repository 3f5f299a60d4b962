#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metabayes/model.hpp"
#include "metabayes/sampler.hpp"

namespace metabayes {

/// Returned by split_rhat when chains sit at distinct constants.
inline constexpr double kRhatDisjointChains = 1.0e6;

/// Classic split potential-scale reduction over 2 * chains half-chains.
/// Exactly 1 when there is no variance at all.
double split_rhat(std::span<const std::vector<double>> chains);

/// Split-chain effective sample size with Geyer's initial monotone sequence
/// truncation. Returns the total draw count when the draws have no variance.
double ess(std::span<const std::vector<double>> chains);

/// Type-7 (linear interpolation) quantile of unsorted values.
double quantile(std::span<const double> values, double prob);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q2_5 = 0.0;
  double q50 = 0.0;
  double q97_5 = 0.0;
  double rhat = 1.0;
  double ess = 0.0;
};

struct SummaryTable {
  std::vector<ParameterSummary> rows;
  double max_rhat = 1.0;
  double min_ess = 0.0;

  const ParameterSummary& at(std::string_view name) const;
};

ParameterSummary summarize_parameter(std::string name, std::span<const std::vector<double>> chains);

/// Pooled summaries of the `monitored` parameters; ConfigError on unknown names.
SummaryTable summarize(const PosteriorDraws& draws, std::span<const std::string> monitored);

/// Everything except the study baselines mu[i] and latent effects u/gamma:
/// theta, beta, tau for pairwise fits; alpha|Emax, ED50, n, tau for MBMA.
std::vector<std::string> monitored_parameters(const PosteriorDraws& draws);

/// Effect in a new study: theta* ~ Normal(theta, tau^2) per draw, one vector
/// per chain. Throws ConfigError when the draws carry no tau.
std::vector<std::vector<double>> predict_new_study(const PosteriorDraws& draws, std::uint64_t seed);

enum class BaselineConvention { mean_of_studies, median_of_studies };

struct DoseBands {
  std::vector<double> dose;
  std::vector<double> q2_5, q25, q50, q75, q97_5;
};

/// Pointwise quantiles of inverse_link(baseline + f(dose)) over draws, where
/// the baseline is each draw's mean (or median) of the study baselines mu[i].
DoseBands dose_curve_bands(const PosteriorDraws& draws, const ModelSpec& spec, std::span<const double> dose_grid,
                           BaselineConvention baseline = BaselineConvention::mean_of_studies);

nlohmann::json summary_to_json(const ParameterSummary& row);
nlohmann::json summary_to_json(const SummaryTable& table);
ParameterSummary parameter_summary_from_json(const nlohmann::json& j);

/// Two-line block "  mean  2.5%   50% 97.5%" / values to 2 decimals.
std::string format_estimates(const ParameterSummary& row);

}  // namespace metabayes
