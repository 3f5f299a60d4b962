#include "metabayes/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "metabayes/error.hpp"

namespace metabayes {

namespace {

// Halves of each chain; the middle draw of an odd-length chain is dropped.
std::vector<std::span<const double>> split_halves(std::span<const std::vector<double>> chains) {
  if (chains.empty()) throw ConfigError("need at least one chain");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) throw ConfigError("all chains must have the same length");
  }
  if (n < 4) throw ConfigError("need at least 4 draws per chain");
  const std::size_t half = n / 2;
  std::vector<std::span<const double>> out;
  for (const auto& c : chains) {
    std::span<const double> s(c);
    out.push_back(s.first(half));
    out.push_back(s.last(half));
  }
  return out;
}

double mean_of(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

}  // namespace

double split_rhat(std::span<const std::vector<double>> chains) {
  auto halves = split_halves(chains);
  const double n = static_cast<double>(halves.front().size());
  std::vector<double> means, vars;
  for (auto h : halves) {
    means.push_back(mean_of(h));
    vars.push_back(sample_variance(h));
  }
  const double w = mean_of(vars);
  const double b = n * sample_variance(means);
  if (w <= 0.0) return b <= 0.0 ? 1.0 : kRhatDisjointChains;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double ess(std::span<const std::vector<double>> chains) {
  auto halves = split_halves(chains);
  const std::size_t m = halves.size();
  const std::size_t n = halves.front().size();
  const double nd = static_cast<double>(n);
  const double total = static_cast<double>(m * n);

  std::vector<double> means(m), chain_var(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = mean_of(halves[c]);
    chain_var[c] = sample_variance(halves[c]);
  }
  const double mean_var = mean_of(chain_var);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += sample_variance(means);
  if (!(var_plus > 0.0) || !(mean_var > 0.0)) return total;

  // Mean over half-chains of the biased (divide by n) autocovariance at `lag`.
  auto mean_acov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto h = halves[c];
      double s = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t) s += (h[t] - means[c]) * (h[t + lag] - means[c]);
      acc += s / nd;
    }
    return acc / static_cast<double>(m);
  };
  auto rho = [&](std::size_t lag) { return 1.0 - (mean_var - mean_acov(lag)) / var_plus; };

  std::vector<double> rho_hat(n + 1, 0.0);
  rho_hat[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = rho(1);
  rho_hat[1] = rho_odd;
  std::size_t s = 1;
  while (s + 4 < n && rho_even + rho_odd > 0.0) {
    rho_even = rho(s + 1);
    rho_odd = rho(s + 2);
    if (rho_even + rho_odd >= 0.0) {
      rho_hat[s + 1] = rho_even;
      rho_hat[s + 2] = rho_odd;
    }
    s += 2;
  }
  const std::size_t max_s = s;
  if (rho_even > 0.0 && max_s + 1 < rho_hat.size()) rho_hat[max_s + 1] = rho_even;

  // Initial monotone sequence.
  for (std::size_t k = 1; k + 3 <= max_s; k += 2) {
    if (rho_hat[k + 1] + rho_hat[k + 2] > rho_hat[k - 1] + rho_hat[k]) {
      rho_hat[k + 1] = 0.5 * (rho_hat[k - 1] + rho_hat[k]);
      rho_hat[k + 2] = rho_hat[k + 1];
    }
  }

  double tau_hat = -1.0;
  for (std::size_t k = 0; k <= max_s; ++k) tau_hat += 2.0 * rho_hat[k];
  if (max_s + 1 < rho_hat.size()) tau_hat += rho_hat[max_s + 1];
  tau_hat = std::max(tau_hat, 1.0 / std::log10(total));
  return total / tau_hat;
}

double quantile(std::span<const double> values, double prob) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("quantile probability must lie in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

const ParameterSummary& SummaryTable::at(std::string_view name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw ConfigError("no summary for '" + std::string(name) + "'");
}

ParameterSummary summarize_parameter(std::string name, std::span<const std::vector<double>> chains) {
  ParameterSummary row;
  row.name = std::move(name);
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  if (pooled.empty()) throw ConfigError("no draws for '" + row.name + "'");
  row.mean = mean_of(pooled);
  row.sd = std::sqrt(sample_variance(pooled));
  std::sort(pooled.begin(), pooled.end());
  row.q2_5 = quantile(pooled, 0.025);
  row.q50 = quantile(pooled, 0.5);
  row.q97_5 = quantile(pooled, 0.975);
  if (chains.front().size() >= 4) {
    row.rhat = split_rhat(chains);
    row.ess = ess(chains);
  } else {
    row.rhat = 1.0;
    row.ess = static_cast<double>(pooled.size());
  }
  return row;
}

SummaryTable summarize(const PosteriorDraws& draws, std::span<const std::string> monitored) {
  SummaryTable table;
  table.min_ess = std::numeric_limits<double>::infinity();
  for (const auto& name : monitored) {
    auto chains = draws.per_chain(name);
    table.rows.push_back(summarize_parameter(name, chains));
    table.max_rhat = std::max(table.max_rhat, table.rows.back().rhat);
    table.min_ess = std::min(table.min_ess, table.rows.back().ess);
  }
  if (table.rows.empty()) table.min_ess = 0.0;
  return table;
}

std::vector<std::string> monitored_parameters(const PosteriorDraws& draws) {
  std::vector<std::string> names;
  for (const auto& name : draws.names) {
    const bool latent = name.rfind("u[", 0) == 0 || name.rfind("gamma[", 0) == 0 || name.rfind("mu[", 0) == 0;
    if (!latent) names.push_back(name);
  }
  return names;
}

std::vector<std::vector<double>> predict_new_study(const PosteriorDraws& draws, std::uint64_t seed) {
  if (!draws.has("tau")) throw ConfigError("prediction for a new study needs a random-effects fit (no tau draws)");
  if (!draws.has("theta")) throw ConfigError("prediction for a new study needs theta draws");
  auto theta = draws.per_chain("theta");
  auto tau = draws.per_chain("tau");
  std::vector<std::vector<double>> out(theta.size());
  for (std::size_t c = 0; c < theta.size(); ++c) {
    Rng rng = Rng::for_chain(seed ^ 0xD1B54A32D192ED03ULL, c);
    out[c].resize(theta[c].size());
    for (std::size_t i = 0; i < theta[c].size(); ++i) out[c][i] = theta[c][i] + tau[c][i] * rng.normal();
  }
  return out;
}

DoseBands dose_curve_bands(const PosteriorDraws& draws, const ModelSpec& spec, std::span<const double> grid,
                           BaselineConvention baseline) {
  if (spec.family != ModelFamily::mbma || !spec.dose_response) {
    throw ConfigError("dose-response bands need a model-based meta-analysis fit");
  }
  if (grid.empty()) throw ConfigError("dose grid must be non-empty");
  for (double d : grid) {
    if (!(d >= 0.0)) throw DomainError("dose grid values must be non-negative");
  }
  const DoseResponseKind kind = *spec.dose_response;
  const LinkKind link_kind = link_for(spec.endpoint);

  std::vector<std::size_t> mu_index;
  for (std::size_t i = 0; i < draws.names.size(); ++i) {
    if (draws.names[i].rfind("mu[", 0) == 0) mu_index.push_back(i);
  }
  if (mu_index.empty()) throw ConfigError("draws carry no study baselines mu[i]");
  const bool linear = kind == DoseResponseKind::linear || kind == DoseResponseKind::log_linear;
  const std::size_t slope_i = draws.index_of(linear ? "alpha" : "Emax");
  const std::size_t ed50_i = linear ? 0 : draws.index_of("ED50");
  const std::size_t hill_i = kind == DoseResponseKind::sigmoidal ? draws.index_of("n") : 0;

  std::vector<std::vector<double>> values(grid.size());
  std::vector<double> mus(mu_index.size());
  for (const auto& chain : draws.chains) {
    const std::size_t dim = chain.dimension;
    for (std::size_t r = 0; r < chain.n_draws(); ++r) {
      const double* row = chain.constrained_draws.data() + r * dim;
      for (std::size_t k = 0; k < mu_index.size(); ++k) mus[k] = row[mu_index[k]];
      double base = 0.0;
      if (baseline == BaselineConvention::mean_of_studies) {
        base = mean_of(mus);
      } else {
        base = quantile(mus, 0.5);
      }
      DoseResponseParams p;
      p.slope = row[slope_i];
      if (!linear) p.ed50 = row[ed50_i];
      if (kind == DoseResponseKind::sigmoidal) p.hill = row[hill_i];
      for (std::size_t g = 0; g < grid.size(); ++g) {
        values[g].push_back(inverse_link(link_kind, base + dose_response(kind, p, grid[g]).value));
      }
    }
  }

  DoseBands bands;
  bands.dose.assign(grid.begin(), grid.end());
  for (auto& v : values) {
    std::sort(v.begin(), v.end());
    bands.q2_5.push_back(quantile(v, 0.025));
    bands.q25.push_back(quantile(v, 0.25));
    bands.q50.push_back(quantile(v, 0.5));
    bands.q75.push_back(quantile(v, 0.75));
    bands.q97_5.push_back(quantile(v, 0.975));
  }
  return bands;
}

nlohmann::json summary_to_json(const ParameterSummary& r) {
  return {{"name", r.name}, {"mean", r.mean}, {"sd", r.sd}, {"q2.5", r.q2_5}, {"q50", r.q50},
          {"q97.5", r.q97_5}, {"rhat", r.rhat}, {"ess", r.ess}};
}

nlohmann::json summary_to_json(const SummaryTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) rows.push_back(summary_to_json(r));
  return {{"max_rhat", table.max_rhat}, {"min_ess", table.min_ess}, {"parameters", rows}};
}

ParameterSummary parameter_summary_from_json(const nlohmann::json& j) {
  try {
    ParameterSummary r;
    r.name = j.at("name").get<std::string>();
    r.mean = j.at("mean").get<double>();
    r.sd = j.at("sd").get<double>();
    r.q2_5 = j.at("q2.5").get<double>();
    r.q50 = j.at("q50").get<double>();
    r.q97_5 = j.at("q97.5").get<double>();
    r.rhat = j.at("rhat").get<double>();
    r.ess = j.at("ess").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed parameter summary: ") + e.what());
  }
}

std::string format_estimates(const ParameterSummary& r) {
  auto cell = [](const std::string& s) {
    std::string out = s.size() < 6 ? std::string(6 - s.size(), ' ') + s : " " + s;
    return out;
  };
  std::string out = cell("mean") + cell("2.5%") + cell("50%") + cell("97.5%") + "\n";
  out += cell(fixed2(r.mean)) + cell(fixed2(r.q2_5)) + cell(fixed2(r.q50)) + cell(fixed2(r.q97_5)) + "\n";
  return out;
}

}  // namespace metabayes
