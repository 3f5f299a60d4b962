#pragma once

#include <string>
#include <vector>

#include "metabayes/data.hpp"
#include "metabayes/diagnostics.hpp"

namespace metabayes {

struct Interval {
  double estimate = 0.0;
  double low = 0.0;
  double high = 0.0;
};

struct StudyEstimate {
  std::string label;
  Interval interval;
};

/// Empirical per-study effect with a 95% Wald interval: log odds ratio for
/// binary data (0.5 added to every cell when one is zero), mean difference
/// for continuous data, log rate ratio for counts. Requires two-arm studies.
std::vector<StudyEstimate> per_study_estimates(const Dataset& dataset);

struct ForestPlotInput {
  std::vector<StudyEstimate> studies;
  Interval pooled;
  Interval prediction;
  std::string caption;

  void validate() const;
};

struct ForestPlotOptions {
  std::string xlab = "log odds ratio";
  std::string study_color = "#333333";
  std::string pooled_color = "#08519c";
  std::string prediction_color = "#6baed6";
};

/// "Heterogeneity (tau): 0.21 [0.00, 0.66]" from the tau summary.
std::string heterogeneity_caption(const ParameterSummary& tau);

/// Median and 2.5%/97.5% quantiles of the pooled chains.
Interval posterior_interval(const std::vector<std::vector<double>>& chains);

/// One row per study, then the pooled and the prediction row. Each row is a
/// `<g class="forest-row">` element.
std::string forest_plot_svg(const ForestPlotInput& input, const ForestPlotOptions& options = {});

struct ObservedPoint {
  double dose = 0.0;
  double value = 0.0;
  /// Drives the marker area: sample size, exposure or 1/se^2.
  double size = 0.0;
};

/// One point per arm on the outcome scale (rate, mean or event rate).
std::vector<ObservedPoint> observed_points(const Dataset& dataset);

struct DosePlotInput {
  DoseBands bands;
  std::vector<ObservedPoint> points;
};

struct DosePlotOptions {
  std::string xlab = "dose";
  std::string ylab = "response";
  std::string band95_color = "#c6dbef";
  std::string band50_color = "#4292c6";
  std::string median_color = "#08306b";
  std::string point_color = "#000000";
};

/// Median polyline over a 95% band and a 50% band, plus observed points
/// (`<circle class="observed">`) with radius proportional to sqrt(size).
std::string dose_plot_svg(const DosePlotInput& input, const DosePlotOptions& options = {});

}  // namespace metabayes
