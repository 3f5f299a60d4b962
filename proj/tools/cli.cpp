#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "metabayes/error.hpp"
#include "metabayes/posterior.hpp"
#include "metabayes/viz.hpp"

namespace metabayes::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

SamplerConfig sampler_from_json(const json& j) {
  reject_unknown(j,
                 {"chains", "iter", "warmup", "seed", "target_accept", "max_leapfrog_steps", "init_radius",
                  "integration_time", "threads"},
                 "sampler");
  SamplerConfig c;
  if (j.contains("chains")) c.chains = j.at("chains").get<int>();
  if (j.contains("iter")) c.iter = j.at("iter").get<int>();
  if (j.contains("warmup")) c.warmup = j.at("warmup").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("target_accept")) c.target_accept = j.at("target_accept").get<double>();
  if (j.contains("max_leapfrog_steps")) c.max_leapfrog_steps = j.at("max_leapfrog_steps").get<int>();
  if (j.contains("init_radius")) c.init_radius = j.at("init_radius").get<double>();
  if (j.contains("integration_time")) c.integration_time = j.at("integration_time").get<double>();
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  c.validate();
  return c;
}

json sampler_to_json(const SamplerConfig& c) {
  return {{"chains", c.chains},
          {"iter", c.iter},
          {"warmup", c.warmup},
          {"seed", c.seed},
          {"target_accept", c.target_accept},
          {"max_leapfrog_steps", c.max_leapfrog_steps},
          {"init_radius", c.init_radius},
          {"integration_time", c.integration_time}};
}

DataSource data_from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j, {"builtin", "path", "format", "arm_vars", "n_arms_var", "covariates"}, "data");
  DataSource d;
  if (j.contains("builtin")) d.builtin = j.at("builtin").get<std::string>();
  if (j.contains("path")) {
    fs::path p = j.at("path").get<std::string>();
    d.path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }
  if (d.builtin.has_value() == d.path.has_value()) throw ConfigError("data needs exactly one of 'builtin' or 'path'");
  if (j.contains("format")) {
    d.format = j.at("format").get<std::string>();
    if (d.format != "wide" && d.format != "long") throw ConfigError("data format must be 'wide' or 'long'");
  }
  if (j.contains("arm_vars")) d.arm_vars = j.at("arm_vars").get<std::string>();
  if (j.contains("n_arms_var")) d.n_arms_var = j.at("n_arms_var").get<std::string>();
  if (d.path && d.format == "wide" && !d.arm_vars) throw ConfigError("wide-format data needs 'arm_vars'");
  if (j.contains("covariates")) {
    for (const auto& c : j.at("covariates")) {
      reject_unknown(c, {"column", "equals"}, "data.covariates");
      CovariateColumn col;
      col.column = c.at("column").get<std::string>();
      if (c.contains("equals")) col.equals = c.at("equals").get<std::string>();
      d.covariates.push_back(std::move(col));
    }
  }
  return d;
}

std::string fmt_g(double v, const char* format) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string default_effect_label(Endpoint e) {
  switch (e) {
    case Endpoint::binary: return "log odds ratio";
    case Endpoint::continuous: return "mean difference";
    case Endpoint::count: return "log rate ratio";
  }
  return "effect";
}

std::string default_response_label(Endpoint e) {
  switch (e) {
    case Endpoint::binary: return "response probability";
    case Endpoint::continuous: return "mean response";
    case Endpoint::count: return "event rate";
  }
  return "response";
}

std::vector<std::string> split_labels(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  try {
    reject_unknown(j, {"data", "model", "sampler", "output_dir", "write_draws", "plot"}, "run config");
    RunConfig c;
    if (!j.contains("data")) throw ConfigError("run config needs a 'data' section");
    if (!j.contains("model")) throw ConfigError("run config needs a 'model' section");
    c.data = data_from_json(j.at("data"), base_dir);
    c.model = model_spec_from_json(j.at("model"));
    if (j.contains("sampler")) c.sampler = sampler_from_json(j.at("sampler"));
    if (j.contains("output_dir")) {
      fs::path p = j.at("output_dir").get<std::string>();
      c.output_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    if (j.contains("write_draws")) c.write_draws = j.at("write_draws").get<bool>();
    if (j.contains("plot")) {
      const json& p = j.at("plot");
      reject_unknown(p, {"xlab", "ylab"}, "plot");
      if (p.contains("xlab")) c.plot.xlab = p.at("xlab").get<std::string>();
      if (p.contains("ylab")) c.plot.ylab = p.at("ylab").get<std::string>();
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  return run_config_from_json(parse_json_file(path), path.parent_path());
}

Dataset load_data(const DataSource& source, ModelSpec& spec) {
  std::optional<WideTable> wide;
  Dataset dataset;
  if (source.builtin) {
    const BuiltinDataset which = builtin_from_string(*source.builtin);
    wide = builtin_table(which);
    dataset = convert_wide_to_long(*wide, builtin_arm_vars(which), spec.endpoint);
  } else if (source.format == "long") {
    dataset = read_long_csv(read_file(*source.path), spec.endpoint);
  } else {
    wide = read_csv_file(source.path->string());
    ArmVars vars = ArmVars::parse(*source.arm_vars);
    if (source.n_arms_var) vars.n_arms_column = *source.n_arms_var;
    dataset = convert_wide_to_long(*wide, vars, spec.endpoint);
  }
  if (!source.covariates.empty()) {
    if (!wide) throw ConfigError("covariate columns need wide-format data; give model.covariates for long data");
    if (!spec.covariates.empty()) throw ConfigError("give covariates either in data.covariates or model.covariates");
    spec.covariates = extract_covariates(*wide, source.covariates);
  }
  return dataset;
}

SamplerConfig apply_thread_limit(SamplerConfig config) {
  if (const char* env = std::getenv("METABAYES_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) throw ConfigError("METABAYES_THREADS must be a positive integer");
    const int current = config.threads > 0 ? config.threads : config.chains;
    config.threads = static_cast<int>(std::min<long>(current, cap));
  }
  return config;
}

FitResult fit(const ModelSpec& spec, const Dataset& dataset, const SamplerConfig& sampler) {
  Posterior posterior(spec, dataset);
  FitResult r;
  r.spec = spec;
  r.priors = posterior.priors();
  r.dataset = dataset;
  r.max_dose = posterior.max_dose();
  r.sampler = sampler;
  r.draws = run_chains(posterior, sampler);
  const auto monitored = monitored_parameters(r.draws);
  r.table = summarize(r.draws, monitored);
  if (r.draws.has("tau") && r.draws.has("theta")) {
    r.prediction = summarize_parameter("theta_new", predict_new_study(r.draws, sampler.seed));
  }
  return r;
}

std::string summary_text(const FitResult& r) {
  const ModelSpec& spec = r.spec;
  const bool mbma = spec.family == ModelFamily::mbma;
  std::ostringstream out;
  out << (mbma ? "Model-based meta-analysis" : spec.family == ModelFamily::meta_regression ? "Meta-regression"
                                                                                            : "Meta-analysis")
      << " using metabayes\n\n";
  out << "Maximum Rhat: " << fmt_g(r.table.max_rhat, "%.3g") << "\n";
  out << "Minimum Effective Sample Size: " << fmt_g(std::floor(r.table.min_ess), "%.0f") << "\n\n";

  const Priors& p = r.priors;
  out << "mu prior: " << p.mu->label() << "\n";
  if (mbma) {
    const auto kind = *spec.dose_response;
    const bool linear = kind == DoseResponseKind::linear || kind == DoseResponseKind::log_linear;
    out << (linear ? "alpha" : "Emax") << " prior: " << p.slope->label() << "\n";
    if (!linear) out << "ED50 prior:" << p.ed50->label() << "\n";
    if (kind == DoseResponseKind::sigmoidal) out << "n prior: " << p.hill->label() << "\n";
  } else {
    out << "theta prior: " << p.theta->label() << "\n";
    if (spec.family == ModelFamily::meta_regression) out << "beta prior: " << p.beta->label() << "\n";
  }
  if (spec.random_effects) out << "tau prior:" << p.tau->label() << "\n";
  out << "\n";

  if (mbma) {
    out << "Dose-response function = " << to_string(*spec.dose_response) << "\n\n";
    for (const char* name : {"alpha", "Emax", "ED50", "n"}) {
      if (!r.draws.has(name)) continue;
      out << name << " estimates\n" << format_estimates(r.table.at(name)) << "\n";
    }
  } else {
    out << "Treatment effect (theta) estimates\n" << format_estimates(r.table.at("theta")) << "\n";
    for (const auto& row : r.table.rows) {
      if (row.name.rfind("beta[", 0) == 0) out << "Covariate effect (" << row.name << ") estimates\n" << format_estimates(row) << "\n";
    }
  }
  if (spec.random_effects) out << "Heterogeneity stdev (tau)\n" << format_estimates(r.table.at("tau")) << "\n";
  if (r.prediction) out << "Prediction for a new study (theta*)\n" << format_estimates(*r.prediction) << "\n";
  return out.str();
}

json summary_json(const FitResult& r) {
  json j;
  ModelSpec filled = r.spec;
  filled.priors = r.priors;
  if (r.spec.family == ModelFamily::mbma) filled.max_dose = r.max_dose;
  j["model"] = model_spec_to_json(filled);
  j["sampler"] = sampler_to_json(r.sampler);
  j["max_rhat"] = r.table.max_rhat;
  j["min_ess"] = r.table.min_ess;
  j["divergences"] = r.draws.divergences();
  j["draws_per_chain"] = r.draws.chains.empty() ? 0 : r.draws.chains.front().n_draws();
  j["parameters"] = summary_to_json(r.table)["parameters"];
  if (r.prediction) j["prediction"] = summary_to_json(*r.prediction);
  json labels = json::array();
  for (std::size_t i = 0; i < r.dataset.n_studies(); ++i) labels.push_back(r.dataset.study_label(i));
  j["study_labels"] = labels;
  json warnings = json::array();
  for (const auto& c : r.draws.chains) {
    for (const auto& w : c.warnings) warnings.push_back(w);
  }
  j["warnings"] = warnings;
  return j;
}

void write_fit_artifacts(const FitResult& r, const fs::path& dir, bool write_draws, const PlotSettings& plot) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  json summary = summary_json(r);
  json plot_json = json::object();
  if (plot.xlab) plot_json["xlab"] = *plot.xlab;
  if (plot.ylab) plot_json["ylab"] = *plot.ylab;
  summary["plot"] = plot_json;
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_file(dir / "summary.txt", summary_text(r));
  write_file(dir / "model.json", summary["model"].dump(2) + "\n");
  write_file(dir / "data.csv", write_long_csv(r.dataset));
  if (write_draws) write_file(dir / "draws.csv", draws_to_csv(r.draws));
}

int cmd_convert(const ConvertArgs& args, std::ostream& out, std::ostream& err) {
  try {
    ArmVars vars = ArmVars::parse(args.arm_vars);
    if (args.n_arms_var) vars.n_arms_column = *args.n_arms_var;
    const Endpoint endpoint = endpoint_from_string(args.endpoint);
    const WideTable wide = read_csv_file(args.in.string());
    const Dataset dataset = convert_wide_to_long(wide, vars, endpoint);
    write_file(args.out, write_long_csv(dataset));
    out << "wrote " << dataset.n_arms() << " rows (" << dataset.n_studies() << " studies) to " << args.out.string()
        << "\n";
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  }
}

int cmd_fit(const fs::path& config_path, std::ostream& out, std::ostream& err) {
  RunConfig config;
  Dataset dataset;
  try {
    config = load_run_config(config_path);
    dataset = load_data(config.data, config.model);
    config.sampler = apply_thread_limit(config.sampler);
    Posterior check(config.model, dataset);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  }
  try {
    const FitResult result = fit(config.model, dataset, config.sampler);
    write_fit_artifacts(result, config.output_dir, config.write_draws, config.plot);
    out << summary_text(result);
    for (const auto& c : result.draws.chains) {
      for (const auto& w : c.warnings) err << "warning: " << w << "\n";
    }
    if (result.draws.divergences() > 0) {
      err << "warning: " << result.draws.divergences() << " divergent transitions after warmup\n";
    }
    if (result.table.max_rhat > 1.05) {
      err << "warning: maximum R-hat " << fmt_g(result.table.max_rhat, "%.4f")
          << " exceeds 1.05; run longer chains before trusting these estimates\n";
      return kNotConverged;
    }
    return kOk;
  } catch (const SamplingError& e) {
    err << "sampling failed: " << e.what() << "\n";
    return kSamplingFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  }
}

int cmd_plot(const PlotArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.kind != "forest" && args.kind != "dose") throw ConfigError("plot kind must be 'forest' or 'dose'");
    const fs::path draws_path = args.fit_dir / "draws.csv";
    const fs::path summary_path = args.fit_dir / "summary.json";
    if (!fs::exists(summary_path)) {
      throw ConfigError("no summary.json in '" + args.fit_dir.string() + "'; run `metabayes fit` first");
    }
    if (!fs::exists(draws_path)) {
      throw ConfigError("no draws.csv in '" + args.fit_dir.string() +
                        "'; rerun `metabayes fit` with \"write_draws\": true");
    }
    const json summary = parse_json_file(summary_path);
    const ModelSpec spec = model_spec_from_json(summary.at("model"));
    const json plot_defaults = summary.value("plot", json::object());
    auto pick = [&](const std::optional<std::string>& flag, const char* key, std::string fallback) {
      if (flag) return *flag;
      if (plot_defaults.contains(key)) return plot_defaults.at(key).get<std::string>();
      return fallback;
    };

    const bool mbma = spec.family == ModelFamily::mbma;
    if (args.kind == "forest" && mbma) {
      throw ConfigError("forest plots need a pairwise fit; use `plot dose` for model-based fits");
    }
    if (args.kind == "dose" && !mbma) throw ConfigError("dose plots need a model-based (mbma) fit");

    const PosteriorDraws draws = draws_from_csv(read_file(draws_path));
    const Dataset dataset = read_long_csv(read_file(args.fit_dir / "data.csv"), spec.endpoint);
    std::string svg;

    if (args.kind == "forest") {
      ForestPlotInput input;
      input.studies = per_study_estimates(dataset);
      std::vector<std::string> labels;
      if (args.labels) {
        labels = split_labels(*args.labels);
      } else {
        labels = summary.at("study_labels").get<std::vector<std::string>>();
      }
      if (labels.size() != input.studies.size()) {
        throw ConfigError("--labels gives " + std::to_string(labels.size()) + " names for " +
                          std::to_string(input.studies.size()) + " studies");
      }
      for (std::size_t i = 0; i < labels.size(); ++i) input.studies[i].label = labels[i];
      input.pooled = posterior_interval(draws.per_chain("theta"));
      if (!draws.has("tau")) throw ConfigError("forest plots need a random-effects fit (no tau draws)");
      const std::uint64_t seed = summary.at("sampler").at("seed").get<std::uint64_t>();
      input.prediction = posterior_interval(predict_new_study(draws, seed));
      input.caption = heterogeneity_caption(summarize_parameter("tau", draws.per_chain("tau")));
      ForestPlotOptions options;
      options.xlab = pick(args.xlab, "xlab", default_effect_label(spec.endpoint));
      svg = forest_plot_svg(input, options);
    } else {
      BaselineConvention baseline;
      if (args.baseline == "mean") baseline = BaselineConvention::mean_of_studies;
      else if (args.baseline == "median") baseline = BaselineConvention::median_of_studies;
      else throw ConfigError("--baseline must be 'mean' or 'median'");
      const double max_dose = dataset.max_dose();
      std::vector<double> grid;
      constexpr int kGridPoints = 101;
      for (int i = 0; i < kGridPoints; ++i) grid.push_back(max_dose * i / (kGridPoints - 1));
      DosePlotInput input;
      input.bands = dose_curve_bands(draws, spec, grid, baseline);
      input.points = observed_points(dataset);
      DosePlotOptions options;
      options.xlab = pick(args.xlab, "xlab", "dose");
      options.ylab = pick(args.ylab, "ylab", default_response_label(spec.endpoint));
      svg = dose_plot_svg(input, options);
    }

    if (args.out) {
      write_file(*args.out, svg);
      out << "wrote " << args.kind << " plot to " << args.out->string() << "\n";
    } else {
      out << svg;
    }
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUserError;
  } catch (const json::exception& e) {
    err << "error: malformed fit artifacts: " << e.what() << "\n";
    return kUserError;
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Bayesian meta-analysis: pairwise, meta-regression and dose-response models"};
  app.require_subcommand(1);

  ConvertArgs convert;
  auto* convert_cmd = app.add_subcommand("convert", "Convert a one-study-per-row CSV to long format");
  convert_cmd->add_option("--in", convert.in, "Wide CSV input")->required();
  convert_cmd->add_option("--arm-vars", convert.arm_vars, "Role=prefix map, e.g. responders=r,sampleSize=n")
      ->required();
  convert_cmd->add_option("--endpoint", convert.endpoint, "binary | continuous | count")->required();
  convert_cmd->add_option("--out", convert.out, "Long CSV output")->required();
  std::string n_arms_var;
  convert_cmd->add_option("--n-arms-var", n_arms_var, "Column with the arm count of each study");

  std::string config_path;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model described by a JSON run config");
  fit_cmd->add_option("--config", config_path, "Run config (JSON)")->required();

  PlotArgs plot;
  std::string xlab, ylab, labels, out_path;
  auto* plot_cmd = app.add_subcommand("plot", "Draw a forest or dose-response plot from fit artifacts");
  plot_cmd->add_option("kind", plot.kind, "forest | dose")->required();
  plot_cmd->add_option("--fit-dir", plot.fit_dir, "Output directory of `fit`")->required();
  plot_cmd->add_option("--xlab", xlab, "x-axis label");
  plot_cmd->add_option("--ylab", ylab, "y-axis label (dose plots)");
  plot_cmd->add_option("--labels", labels, "Comma-separated study names (forest plots)");
  plot_cmd->add_option("--out", out_path, "SVG output file (default: stdout)");
  plot_cmd->add_option("--baseline", plot.baseline, "Baseline over studies for dose curves: mean | median");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUserError;
  }

  if (*convert_cmd) {
    if (!n_arms_var.empty()) convert.n_arms_var = n_arms_var;
    return cmd_convert(convert, std::cout, std::cerr);
  }
  if (*fit_cmd) return cmd_fit(config_path, std::cout, std::cerr);
  if (!xlab.empty()) plot.xlab = xlab;
  if (!ylab.empty()) plot.ylab = ylab;
  if (!labels.empty()) plot.labels = labels;
  if (!out_path.empty()) plot.out = out_path;
  return cmd_plot(plot, std::cout, std::cerr);
}

}  // namespace metabayes::cli
