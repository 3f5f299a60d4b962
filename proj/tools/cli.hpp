#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metabayes/data.hpp"
#include "metabayes/diagnostics.hpp"
#include "metabayes/model.hpp"
#include "metabayes/sampler.hpp"

namespace metabayes::cli {

enum ExitCode : int { kOk = 0, kUserError = 2, kNotConverged = 3, kSamplingFailed = 4 };

/// Where the data comes from: a bundled table or a CSV file.
struct DataSource {
  std::optional<std::string> builtin;
  std::optional<std::filesystem::path> path;
  std::string format = "wide";  // wide | long
  std::optional<std::string> arm_vars;
  std::optional<std::string> n_arms_var;
  std::vector<CovariateColumn> covariates;
};

struct PlotSettings {
  std::optional<std::string> xlab;
  std::optional<std::string> ylab;
};

struct RunConfig {
  DataSource data;
  ModelSpec model;
  SamplerConfig sampler;
  std::filesystem::path output_dir = "fit";
  bool write_draws = true;
  PlotSettings plot;
};

/// Strict parse: unknown keys anywhere raise ConfigError. Relative paths are
/// resolved against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Loads the dataset and fills model covariates from the data source.
Dataset load_data(const DataSource& source, ModelSpec& spec);

/// Caps `config.threads` by METABAYES_THREADS when set.
SamplerConfig apply_thread_limit(SamplerConfig config);

struct FitResult {
  ModelSpec spec;
  Priors priors;
  Dataset dataset;
  double max_dose = 0.0;
  SamplerConfig sampler;
  PosteriorDraws draws;
  SummaryTable table;
  std::optional<ParameterSummary> prediction;
};

FitResult fit(const ModelSpec& spec, const Dataset& dataset, const SamplerConfig& sampler);

std::string summary_text(const FitResult& result);
nlohmann::json summary_json(const FitResult& result);

/// Writes summary.json, summary.txt, model.json, data.csv and (optionally)
/// draws.csv into `dir`.
void write_fit_artifacts(const FitResult& result, const std::filesystem::path& dir, bool write_draws,
                         const PlotSettings& plot);

struct ConvertArgs {
  std::filesystem::path in;
  std::string arm_vars;
  std::string endpoint;
  std::filesystem::path out;
  std::optional<std::string> n_arms_var;
};

struct PlotArgs {
  std::string kind;  // forest | dose
  std::filesystem::path fit_dir;
  std::optional<std::string> xlab;
  std::optional<std::string> ylab;
  std::optional<std::string> labels;  // comma-separated
  std::optional<std::filesystem::path> out;
  std::string baseline = "mean";
};

int cmd_convert(const ConvertArgs& args, std::ostream& out, std::ostream& err);
int cmd_fit(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);
int cmd_plot(const PlotArgs& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace metabayes::cli
