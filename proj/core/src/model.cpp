#include "metabayes/model.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "metabayes/error.hpp"

namespace metabayes {

namespace {

std::string fmt_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

LinkKind link_for(Endpoint endpoint) {
  switch (endpoint) {
    case Endpoint::binary: return LinkKind::logit;
    case Endpoint::continuous: return LinkKind::identity;
    case Endpoint::count: return LinkKind::log;
  }
  return LinkKind::identity;
}

std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::logit: return "logit";
    case LinkKind::identity: return "identity";
    case LinkKind::log: return "log";
  }
  return "?";
}

double link(LinkKind kind, double value) {
  switch (kind) {
    case LinkKind::logit:
      if (!(value > 0.0 && value < 1.0)) throw DomainError("logit needs a value in (0, 1)");
      return std::log(value) - std::log1p(-value);
    case LinkKind::identity:
      return value;
    case LinkKind::log:
      if (!(value > 0.0)) throw DomainError("log link needs a positive value");
      return std::log(value);
  }
  return value;
}

double inverse_link(LinkKind kind, double eta) {
  switch (kind) {
    case LinkKind::logit:
      return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
    case LinkKind::identity:
      return eta;
    case LinkKind::log:
      return std::exp(eta);
  }
  return eta;
}

// ---------------------------------------------------------------------------

std::string_view to_string(DoseResponseKind kind) {
  switch (kind) {
    case DoseResponseKind::linear: return "linear";
    case DoseResponseKind::log_linear: return "log-linear";
    case DoseResponseKind::emax: return "emax";
    case DoseResponseKind::sigmoidal: return "sigmoidal";
  }
  return "?";
}

DoseResponseKind dose_response_from_string(std::string_view name) {
  if (name == "linear") return DoseResponseKind::linear;
  if (name == "log-linear" || name == "log_linear") return DoseResponseKind::log_linear;
  if (name == "emax") return DoseResponseKind::emax;
  if (name == "sigmoidal") return DoseResponseKind::sigmoidal;
  throw ConfigError("unknown dose-response function '" + std::string(name) +
                    "' (expected linear, log-linear, emax or sigmoidal)");
}

std::vector<std::string> dose_response_roles(DoseResponseKind kind) {
  switch (kind) {
    case DoseResponseKind::linear:
    case DoseResponseKind::log_linear: return {"alpha"};
    case DoseResponseKind::emax: return {"Emax", "ED50"};
    case DoseResponseKind::sigmoidal: return {"Emax", "ED50", "n"};
  }
  return {};
}

DoseResponseValue dose_response(DoseResponseKind kind, const DoseResponseParams& p, double dose) {
  DoseResponseValue out;
  switch (kind) {
    case DoseResponseKind::linear:
      out.d_slope = dose;
      break;
    case DoseResponseKind::log_linear:
      out.d_slope = std::log1p(dose);
      break;
    case DoseResponseKind::emax: {
      const double denom = p.ed50 + dose;
      out.d_slope = dose / denom;
      out.d_log_ed50 = -p.slope * dose * p.ed50 / (denom * denom);
      break;
    }
    case DoseResponseKind::sigmoidal: {
      if (dose <= 0.0) break;
      // f = Emax * sigma(s), s = n * (log dose - log ED50).
      const double s = p.hill * (std::log(dose) - std::log(p.ed50));
      const double sig = inverse_link(LinkKind::logit, s);
      const double slope_of_sig = sig * (1.0 - sig);
      out.d_slope = sig;
      out.d_log_ed50 = -p.slope * p.hill * slope_of_sig;
      out.d_log_hill = p.slope * s * slope_of_sig;
      break;
    }
  }
  out.value = p.slope * out.d_slope;
  return out;
}

double dose_response_eval(DoseResponseKind kind, const std::map<std::string, double>& params, double dose) {
  auto get = [&](const std::string& role) {
    auto it = params.find(role);
    if (it == params.end()) {
      throw ConfigError("dose-response '" + std::string(to_string(kind)) + "' needs parameter '" + role + "'");
    }
    return it->second;
  };
  if (dose < 0.0) throw DomainError("dose must be non-negative");
  DoseResponseParams p;
  if (kind == DoseResponseKind::linear || kind == DoseResponseKind::log_linear) {
    p.slope = get("alpha");
  } else {
    p.slope = get("Emax");
    p.ed50 = get("ED50");
    if (!(p.ed50 > 0.0)) throw DomainError("ED50 must be positive");
    if (kind == DoseResponseKind::sigmoidal) {
      p.hill = get("n");
      if (!(p.hill > 0.0)) throw DomainError("Hill parameter n must be positive");
    }
  }
  return dose_response(kind, p, dose).value;
}

// ---------------------------------------------------------------------------

void PriorSpec::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("prior ") + what + " must be positive");
  };
  switch (family) {
    case PriorFamily::normal: positive(b, "sd"); break;
    case PriorFamily::half_normal: positive(b, "scale"); break;
    case PriorFamily::cauchy: positive(b, "scale"); break;
    case PriorFamily::log_normal: positive(b, "sdlog"); break;
    case PriorFamily::uniform:
      if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) throw ConfigError("uniform prior needs lower < upper");
      break;
    case PriorFamily::functional_ed50: break;
  }
}

std::string PriorSpec::label() const {
  switch (family) {
    case PriorFamily::normal: return "Normal(" + fmt_number(a) + "," + fmt_number(b) + ")";
    case PriorFamily::half_normal: return "half-normal(" + fmt_number(b) + ")";
    case PriorFamily::cauchy: return "half-cauchy(" + fmt_number(a) + "," + fmt_number(b) + ")";
    case PriorFamily::uniform: return "uniform(" + fmt_number(a) + "," + fmt_number(b) + ")";
    case PriorFamily::log_normal: return "lognormal(" + fmt_number(a) + "," + fmt_number(b) + ")";
    case PriorFamily::functional_ed50: return "functional(" + fmt_number(a) + "," + fmt_number(b) + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------

std::string_view to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::pairwise: return "pairwise";
    case ModelFamily::meta_regression: return "meta_regression";
    case ModelFamily::mbma: return "mbma";
  }
  return "?";
}

std::string_view to_string(Parametrization parametrization) {
  return parametrization == Parametrization::symmetric ? "symmetric" : "baseline_contrast";
}

Parametrization ModelSpec::effective_parametrization() const {
  if (family == ModelFamily::mbma) return Parametrization::baseline_contrast;
  return parametrization.value_or(Parametrization::symmetric);
}

void ModelSpec::validate(const Dataset& dataset) const {
  if (dataset.endpoint() != endpoint) {
    throw ConfigError("likelihood expects a " + std::string(to_string(endpoint)) + " endpoint but the dataset is " +
                      std::string(to_string(dataset.endpoint())));
  }
  if (dataset.n_studies() == 0) throw ConfigError("dataset has no studies");

  if (family == ModelFamily::mbma) {
    if (!dose_response) throw ConfigError("model-based meta-analysis needs a dose_response function");
    if (parametrization == Parametrization::symmetric) {
      throw ConfigError("model-based meta-analysis uses the baseline-contrast coding only");
    }
    for (const ArmRecord& a : dataset.arms()) {
      if (!a.dose) throw ConfigError("model-based meta-analysis needs a dose on every arm");
    }
    if (max_dose && !(*max_dose > 0.0)) throw ConfigError("max_dose must be positive");
    if (!max_dose && !(dataset.max_dose() > 0.0)) throw ConfigError("dataset has no positive dose");
  } else {
    if (dose_response) throw ConfigError("dose_response is only valid for model-based meta-analysis");
    for (std::size_t s = 0; s < dataset.n_studies(); ++s) {
      if (dataset.study_arms(s).size() != 2) {
        throw ConfigError("pairwise models need exactly 2 arms per study; study " + dataset.study_label(s) +
                          " has " + std::to_string(dataset.study_arms(s).size()));
      }
    }
  }

  if (family == ModelFamily::meta_regression) {
    if (covariates.size() != dataset.n_studies()) {
      throw ConfigError("meta-regression needs a covariate row per study (" + std::to_string(dataset.n_studies()) +
                        "), got " + std::to_string(covariates.size()));
    }
    if (n_covariates() == 0) throw ConfigError("meta-regression needs at least one covariate");
    for (const auto& row : covariates) {
      if (row.size() != n_covariates()) throw ConfigError("covariate rows have unequal lengths");
      for (double v : row) {
        if (!std::isfinite(v)) throw ConfigError("covariates must be finite");
      }
    }
  } else if (!covariates.empty()) {
    throw ConfigError("covariates are only valid for meta-regression");
  }

  auto check = [](const std::optional<PriorSpec>& prior, const char* name, std::set<PriorFamily> allowed) {
    if (!prior) return;
    prior->validate();
    if (!allowed.count(prior->family)) {
      throw ConfigError(std::string("prior ") + prior->label() + " is not supported for " + name);
    }
  };
  check(priors.mu, "mu", {PriorFamily::normal});
  check(priors.theta, "theta", {PriorFamily::normal});
  check(priors.beta, "beta", {PriorFamily::normal});
  check(priors.slope, "the dose-response slope", {PriorFamily::normal});
  check(priors.tau, "tau", {PriorFamily::half_normal, PriorFamily::cauchy, PriorFamily::uniform});
  check(priors.ed50, "ED50", {PriorFamily::functional_ed50, PriorFamily::log_normal});
  check(priors.hill, "n", {PriorFamily::normal, PriorFamily::half_normal, PriorFamily::log_normal});
  if (priors.tau && priors.tau->family == PriorFamily::uniform && priors.tau->a < 0.0) {
    throw ConfigError("uniform prior for tau needs a non-negative lower bound");
  }
}

Priors default_priors(const ModelSpec& spec) {
  Priors p = spec.priors;
  if (!p.mu) p.mu = PriorSpec::normal(0.0, 10.0);
  if (!p.theta) p.theta = PriorSpec::normal(0.0, 2.5);
  if (!p.beta) p.beta = PriorSpec::normal(0.0, 100.0);
  if (!p.tau) p.tau = PriorSpec::half_normal(0.5);
  if (!p.slope) p.slope = PriorSpec::normal(0.0, 10.0);
  if (!p.ed50) p.ed50 = PriorSpec::functional_ed50();
  // Centred on the Emax-equivalent shape; truncated to n > 0.
  if (!p.hill) p.hill = PriorSpec::normal(1.0, 2.0);
  return p;
}

// ---------------------------------------------------------------------------

double contrast_weight(const ModelSpec& spec, int arm_index) {
  if (spec.effective_parametrization() == Parametrization::symmetric) return arm_index == 0 ? -0.5 : 0.5;
  return arm_index == 0 ? 0.0 : 1.0;
}

double linear_predictor(const ModelSpec& spec, const ArmRecord& arm, const PredictorInputs& in) {
  if (spec.family == ModelFamily::mbma) {
    if (!spec.dose_response) throw ConfigError("model-based meta-analysis needs a dose_response function");
    if (arm.arm == 0) return in.mu;
    return in.mu + dose_response(*spec.dose_response, in.dose_response, arm.dose.value_or(0.0)).value + in.gamma;
  }
  if (in.beta.size() != in.covariates.size()) {
    throw ConfigError("beta has " + std::to_string(in.beta.size()) + " entries but there are " +
                      std::to_string(in.covariates.size()) + " covariates");
  }
  double contrast = in.d + in.gamma;
  for (std::size_t k = 0; k < in.beta.size(); ++k) contrast += in.covariates[k] * in.beta[k];
  return in.mu + contrast_weight(spec, arm.arm) * contrast;
}

// ---------------------------------------------------------------------------

SquareMatrix sigma_gamma(double tau, std::size_t n) {
  SquareMatrix s(n);
  const double var = tau * tau;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) s(i, j) = i == j ? var : 0.5 * var;
  }
  return s;
}

SquareMatrix cholesky(const SquareMatrix& a) {
  SquareMatrix l(a.n);
  for (std::size_t i = 0; i < a.n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a(i, j);
      for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(sum > 0.0)) throw DomainError("matrix is not positive definite");
        l(i, i) = std::sqrt(sum);
      } else {
        l(i, j) = sum / l(j, j);
      }
    }
  }
  return l;
}

SquareMatrix sigma_gamma_cholesky(double tau, std::size_t n) {
  if (n < 1) throw DomainError("need at least one treatment arm");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw DomainError("tau must be non-negative and finite");
  // Factor the tau = 1 pattern once and scale; also covers tau = 0.
  SquareMatrix l = cholesky(sigma_gamma(1.0, n));
  for (double& v : l.values) v *= tau;
  return l;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError("unknown key '" + item.key() + "' in " + where);
  }
}

double number_at(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError(where + " needs a numeric '" + key + "'");
  }
  return j.at(key).get<double>();
}

}  // namespace

json prior_to_json(const PriorSpec& p) {
  switch (p.family) {
    case PriorFamily::normal: return {{"dist", "normal"}, {"mean", p.a}, {"sd", p.b}};
    case PriorFamily::half_normal: return {{"dist", "half_normal"}, {"scale", p.b}};
    case PriorFamily::cauchy: return {{"dist", "cauchy"}, {"location", p.a}, {"scale", p.b}};
    case PriorFamily::uniform: return {{"dist", "uniform"}, {"lower", p.a}, {"upper", p.b}};
    case PriorFamily::log_normal: return {{"dist", "log_normal"}, {"meanlog", p.a}, {"sdlog", p.b}};
    case PriorFamily::functional_ed50: return {{"dist", "functional"}};
  }
  return {};
}

PriorSpec prior_from_json(const json& j) {
  if (!j.is_object() || !j.contains("dist") || !j.at("dist").is_string()) {
    throw ConfigError("a prior must be an object with a 'dist' string");
  }
  const std::string dist = j.at("dist").get<std::string>();
  const std::string where = "prior '" + dist + "'";
  PriorSpec p;
  if (dist == "normal") {
    reject_unknown(j, {"dist", "mean", "sd"}, where);
    p = PriorSpec::normal(number_at(j, "mean", where), number_at(j, "sd", where));
  } else if (dist == "half_normal" || dist == "half-normal") {
    reject_unknown(j, {"dist", "scale"}, where);
    p = PriorSpec::half_normal(number_at(j, "scale", where));
  } else if (dist == "cauchy") {
    reject_unknown(j, {"dist", "location", "scale"}, where);
    p = PriorSpec::cauchy(j.contains("location") ? number_at(j, "location", where) : 0.0, number_at(j, "scale", where));
  } else if (dist == "uniform") {
    reject_unknown(j, {"dist", "lower", "upper"}, where);
    p = PriorSpec::uniform(number_at(j, "lower", where), number_at(j, "upper", where));
  } else if (dist == "log_normal" || dist == "lognormal") {
    reject_unknown(j, {"dist", "meanlog", "sdlog"}, where);
    p = PriorSpec::log_normal(number_at(j, "meanlog", where), number_at(j, "sdlog", where));
  } else if (dist == "functional") {
    reject_unknown(j, {"dist"}, where);
    p = PriorSpec::functional_ed50();
  } else {
    throw ConfigError("unknown prior distribution '" + dist + "'");
  }
  p.validate();
  return p;
}

json model_spec_to_json(const ModelSpec& spec) {
  static const char* likelihoods[] = {"binomial", "normal", "poisson"};
  json j;
  j["family"] = std::string(to_string(spec.family));
  j["likelihood"] = likelihoods[static_cast<int>(spec.endpoint)];
  j["random_effects"] = spec.random_effects;
  if (spec.parametrization) j["parametrization"] = std::string(to_string(*spec.parametrization));
  j["non_centered"] = spec.non_centered;
  if (!spec.covariates.empty()) j["covariates"] = spec.covariates;
  if (spec.dose_response) j["dose_response"] = std::string(to_string(*spec.dose_response));
  if (spec.max_dose) j["max_dose"] = *spec.max_dose;
  json priors = json::object();
  const Priors& p = spec.priors;
  if (p.mu) priors["mu"] = prior_to_json(*p.mu);
  if (p.theta) priors["theta"] = prior_to_json(*p.theta);
  if (p.beta) priors["beta"] = prior_to_json(*p.beta);
  if (p.tau) priors["tau"] = prior_to_json(*p.tau);
  if (p.slope) priors["slope"] = prior_to_json(*p.slope);
  if (p.ed50) priors["ED50"] = prior_to_json(*p.ed50);
  if (p.hill) priors["n"] = prior_to_json(*p.hill);
  j["priors"] = priors;
  return j;
}

ModelSpec model_spec_from_json(const json& j) {
  reject_unknown(j,
                 {"family", "likelihood", "random_effects", "parametrization", "non_centered", "covariates",
                  "dose_response", "max_dose", "priors"},
                 "model");
  ModelSpec spec;
  try {
    if (j.contains("family")) {
      const auto name = j.at("family").get<std::string>();
      if (name == "pairwise") spec.family = ModelFamily::pairwise;
      else if (name == "meta_regression") spec.family = ModelFamily::meta_regression;
      else if (name == "mbma") spec.family = ModelFamily::mbma;
      else throw ConfigError("unknown model family '" + name + "'");
    }
    if (!j.contains("likelihood")) throw ConfigError("model needs a 'likelihood' (binomial, normal or poisson)");
    spec.endpoint = endpoint_from_string(j.at("likelihood").get<std::string>());
    if (j.contains("random_effects")) spec.random_effects = j.at("random_effects").get<bool>();
    if (j.contains("parametrization")) {
      const auto name = j.at("parametrization").get<std::string>();
      if (name == "symmetric") spec.parametrization = Parametrization::symmetric;
      else if (name == "baseline_contrast") spec.parametrization = Parametrization::baseline_contrast;
      else throw ConfigError("unknown parametrization '" + name + "'");
    }
    if (j.contains("non_centered")) spec.non_centered = j.at("non_centered").get<bool>();
    if (j.contains("covariates")) spec.covariates = j.at("covariates").get<std::vector<std::vector<double>>>();
    if (j.contains("dose_response")) spec.dose_response = dose_response_from_string(j.at("dose_response").get<std::string>());
    if (j.contains("max_dose")) spec.max_dose = j.at("max_dose").get<double>();
    if (j.contains("priors")) {
      const json& pj = j.at("priors");
      reject_unknown(pj, {"mu", "theta", "beta", "tau", "slope", "alpha", "Emax", "ED50", "n"}, "priors");
      Priors& p = spec.priors;
      if (pj.contains("mu")) p.mu = prior_from_json(pj.at("mu"));
      if (pj.contains("theta")) p.theta = prior_from_json(pj.at("theta"));
      if (pj.contains("beta")) p.beta = prior_from_json(pj.at("beta"));
      if (pj.contains("tau")) p.tau = prior_from_json(pj.at("tau"));
      for (const char* key : {"slope", "alpha", "Emax"}) {
        if (pj.contains(key)) p.slope = prior_from_json(pj.at(key));
      }
      if (pj.contains("ED50")) p.ed50 = prior_from_json(pj.at("ED50"));
      if (pj.contains("n")) p.hill = prior_from_json(pj.at("n"));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return spec;
}

}  // namespace metabayes
