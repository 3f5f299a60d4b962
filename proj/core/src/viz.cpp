#include "metabayes/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "metabayes/error.hpp"

namespace metabayes {

namespace {

constexpr double kZ95 = 1.959963984540054;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string escape_xml(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

Interval wald(double estimate, double se) { return {estimate, estimate - kZ95 * se, estimate + kZ95 * se}; }

Interval binary_estimate(const BinaryOutcome& control, const BinaryOutcome& treated) {
  double a = static_cast<double>(treated.responders);
  double b = static_cast<double>(treated.sample_size - treated.responders);
  double c = static_cast<double>(control.responders);
  double d = static_cast<double>(control.sample_size - control.responders);
  if (a == 0.0 || b == 0.0 || c == 0.0 || d == 0.0) {
    a += 0.5;
    b += 0.5;
    c += 0.5;
    d += 0.5;
  }
  return wald(std::log(a * d / (b * c)), std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d));
}

Interval continuous_estimate(const ContinuousOutcome& control, const ContinuousOutcome& treated) {
  return wald(treated.mean - control.mean, std::hypot(treated.std_err, control.std_err));
}

Interval count_estimate(const CountOutcome& control, const CountOutcome& treated) {
  double e1 = static_cast<double>(treated.events);
  double e0 = static_cast<double>(control.events);
  if (e1 == 0.0 || e0 == 0.0) {
    e1 += 0.5;
    e0 += 0.5;
  }
  return wald(std::log((e1 / treated.exposure) / (e0 / control.exposure)), std::sqrt(1.0 / e1 + 1.0 / e0));
}

// Roughly five round-numbered ticks covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi) {
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) ticks.push_back(std::abs(t) < 1e-12 ? 0.0 : t);
  return ticks;
}

struct Scale {
  double lo, hi, px_lo, px_hi;
  double operator()(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

}  // namespace

std::vector<StudyEstimate> per_study_estimates(const Dataset& dataset) {
  std::vector<StudyEstimate> out;
  for (std::size_t i = 0; i < dataset.n_studies(); ++i) {
    auto arms = dataset.study_arms(i);
    if (arms.size() != 2) {
      throw ValidationError("study " + dataset.study_label(i) + " has " + std::to_string(arms.size()) +
                            " arms; per-study estimates need two-arm studies (use the dose-response plot for "
                            "multi-arm data)");
    }
    StudyEstimate e;
    e.label = dataset.study_label(i);
    const auto& control = arms[0].outcome;
    const auto& treated = arms[1].outcome;
    switch (dataset.endpoint()) {
      case Endpoint::binary:
        e.interval = binary_estimate(std::get<BinaryOutcome>(control), std::get<BinaryOutcome>(treated));
        break;
      case Endpoint::continuous:
        e.interval = continuous_estimate(std::get<ContinuousOutcome>(control), std::get<ContinuousOutcome>(treated));
        break;
      case Endpoint::count:
        e.interval = count_estimate(std::get<CountOutcome>(control), std::get<CountOutcome>(treated));
        break;
    }
    out.push_back(std::move(e));
  }
  return out;
}

void ForestPlotInput::validate() const {
  auto check = [](const Interval& iv, const std::string& what) {
    if (!(std::isfinite(iv.low) && std::isfinite(iv.high) && std::isfinite(iv.estimate)))
      throw DomainError(what + ": interval is not finite");
    if (!(iv.low <= iv.estimate && iv.estimate <= iv.high))
      throw DomainError(what + ": interval must satisfy low <= estimate <= high");
  };
  for (const auto& s : studies) check(s.interval, "study " + s.label);
  check(pooled, "pooled effect");
  check(prediction, "prediction");
}

std::string heterogeneity_caption(const ParameterSummary& tau) {
  return "Heterogeneity (tau): " + num(tau.q50) + " [" + num(tau.q2_5) + ", " + num(tau.q97_5) + "]";
}

Interval posterior_interval(const std::vector<std::vector<double>>& chains) {
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  return {quantile(pooled, 0.5), quantile(pooled, 0.025), quantile(pooled, 0.975)};
}

std::string forest_plot_svg(const ForestPlotInput& input, const ForestPlotOptions& options) {
  input.validate();
  const std::size_t n_rows = input.studies.size() + 2;
  const double width = 800.0;
  const double height = 60.0 * static_cast<double>(n_rows) + 120.0;
  const double top = 40.0;
  const double plot_bottom = top + 60.0 * static_cast<double>(n_rows);

  double lo = 0.0, hi = 0.0;
  auto extend = [&](const Interval& iv) {
    lo = std::min(lo, iv.low);
    hi = std::max(hi, iv.high);
  };
  for (const auto& s : input.studies) extend(s.interval);
  extend(input.pooled);
  extend(input.prediction);
  pad_range(lo, hi);
  const Scale x{lo, hi, 220.0, 600.0};

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" font-family=\"sans-serif\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"#ffffff\"/>\n";

  // Null-effect reference line.
  svg << "<line x1=\"" << num(x(0.0)) << "\" y1=\"" << num(top) << "\" x2=\"" << num(x(0.0)) << "\" y2=\""
      << num(plot_bottom) << "\" stroke=\"#999999\" stroke-dasharray=\"4,4\"/>\n";

  auto row = [&](std::size_t index, const std::string& label, const Interval& iv, const std::string& kind,
                 const std::string& color) {
    const double y = top + 60.0 * static_cast<double>(index) + 30.0;
    svg << "<g class=\"forest-row\" data-kind=\"" << kind << "\" data-row=\"" << index << "\" data-y=\"" << num(y)
        << "\">\n";
    svg << "  <text x=\"10\" y=\"" << num(y + 5.0) << "\" font-size=\"14\">" << escape_xml(label) << "</text>\n";
    svg << "  <line x1=\"" << num(x(iv.low)) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x(iv.high)) << "\" y2=\""
        << num(y) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    if (kind == "pooled") {
      const double cx = x(iv.estimate);
      svg << "  <polygon points=\"" << num(x(iv.low)) << ',' << num(y) << ' ' << num(cx) << ',' << num(y - 10.0)
          << ' ' << num(x(iv.high)) << ',' << num(y) << ' ' << num(cx) << ',' << num(y + 10.0) << "\" fill=\""
          << color << "\"/>\n";
    } else {
      svg << "  <rect x=\"" << num(x(iv.estimate) - 5.0) << "\" y=\"" << num(y - 5.0)
          << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    }
    svg << "  <text x=\"620\" y=\"" << num(y + 5.0) << "\" font-size=\"13\">" << num(iv.estimate) << " ["
        << num(iv.low) << ", " << num(iv.high) << "]</text>\n";
    svg << "</g>\n";
  };

  for (std::size_t i = 0; i < input.studies.size(); ++i)
    row(i, input.studies[i].label, input.studies[i].interval, "study", options.study_color);
  row(input.studies.size(), "Pooled effect (theta)", input.pooled, "pooled", options.pooled_color);
  row(input.studies.size() + 1, "Prediction (theta*)", input.prediction, "prediction", options.prediction_color);

  svg << "<line x1=\"" << num(x.px_lo) << "\" y1=\"" << num(plot_bottom) << "\" x2=\"" << num(x.px_hi)
      << "\" y2=\"" << num(plot_bottom) << "\" stroke=\"#000000\"/>\n";
  for (double t : nice_ticks(lo, hi)) {
    svg << "<line x1=\"" << num(x(t)) << "\" y1=\"" << num(plot_bottom) << "\" x2=\"" << num(x(t)) << "\" y2=\""
        << num(plot_bottom + 5.0) << "\" stroke=\"#000000\"/>\n"
        << "<text x=\"" << num(x(t)) << "\" y=\"" << num(plot_bottom + 20.0)
        << "\" font-size=\"12\" text-anchor=\"middle\">" << tick_label(t) << "</text>\n";
  }
  svg << "<text x=\"" << num(0.5 * (x.px_lo + x.px_hi)) << "\" y=\"" << num(plot_bottom + 42.0)
      << "\" font-size=\"14\" text-anchor=\"middle\">" << escape_xml(options.xlab) << "</text>\n";
  svg << "<text class=\"caption\" x=\"10\" y=\"" << num(height - 20.0) << "\" font-size=\"14\">"
      << escape_xml(input.caption) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::vector<ObservedPoint> observed_points(const Dataset& dataset) {
  std::vector<ObservedPoint> out;
  for (const auto& arm : dataset.arms()) {
    ObservedPoint p;
    p.dose = arm.dose.value_or(0.0);
    if (const auto* b = std::get_if<BinaryOutcome>(&arm.outcome)) {
      p.value = static_cast<double>(b->responders) / static_cast<double>(b->sample_size);
      p.size = static_cast<double>(b->sample_size);
    } else if (const auto* c = std::get_if<ContinuousOutcome>(&arm.outcome)) {
      p.value = c->mean;
      p.size = 1.0 / (c->std_err * c->std_err);
    } else {
      const auto& k = std::get<CountOutcome>(arm.outcome);
      p.value = static_cast<double>(k.events) / k.exposure;
      p.size = k.exposure;
    }
    out.push_back(p);
  }
  return out;
}

std::string dose_plot_svg(const DosePlotInput& input, const DosePlotOptions& options) {
  const auto& b = input.bands;
  if (b.dose.empty()) throw ConfigError("dose grid must be non-empty");
  const std::size_t n = b.dose.size();
  for (const auto* v : {&b.q2_5, &b.q25, &b.q50, &b.q75, &b.q97_5}) {
    if (v->size() != n) throw ConfigError("dose bands must match the dose grid length");
  }

  double x_lo = b.dose.front(), x_hi = b.dose.front();
  double y_lo = b.q2_5.front(), y_hi = b.q97_5.front();
  for (std::size_t i = 0; i < n; ++i) {
    x_lo = std::min(x_lo, b.dose[i]);
    x_hi = std::max(x_hi, b.dose[i]);
    y_lo = std::min(y_lo, b.q2_5[i]);
    y_hi = std::max(y_hi, b.q97_5[i]);
  }
  double max_size = 0.0;
  for (const auto& p : input.points) {
    x_lo = std::min(x_lo, p.dose);
    x_hi = std::max(x_hi, p.dose);
    y_lo = std::min(y_lo, p.value);
    y_hi = std::max(y_hi, p.value);
    max_size = std::max(max_size, p.size);
  }
  pad_range(x_lo, x_hi);
  pad_range(y_lo, y_hi);

  const double width = 800.0, height = 560.0;
  const Scale x{x_lo, x_hi, 80.0, 760.0};
  const Scale y{y_lo, y_hi, 480.0, 40.0};

  auto band_path = [&](const std::vector<double>& lower, const std::vector<double>& upper) {
    std::ostringstream pts;
    for (std::size_t i = 0; i < n; ++i) pts << num(x(b.dose[i])) << ',' << num(y(upper[i])) << ' ';
    for (std::size_t i = n; i-- > 0;) pts << num(x(b.dose[i])) << ',' << num(y(lower[i])) << (i ? " " : "");
    return pts.str();
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" font-family=\"sans-serif\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"#ffffff\"/>\n";
  svg << "<polygon class=\"band95\" points=\"" << band_path(b.q2_5, b.q97_5) << "\" fill=\"" << options.band95_color
      << "\"/>\n";
  svg << "<polygon class=\"band50\" points=\"" << band_path(b.q25, b.q75) << "\" fill=\"" << options.band50_color
      << "\"/>\n";
  svg << "<polyline class=\"median\" fill=\"none\" stroke=\"" << options.median_color
      << "\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < n; ++i) svg << num(x(b.dose[i])) << ',' << num(y(b.q50[i])) << (i + 1 < n ? " " : "");
  svg << "\"/>\n";

  for (const auto& p : input.points) {
    const double r = max_size > 0.0 ? 2.0 + 8.0 * std::sqrt(p.size / max_size) : 4.0;
    svg << "<circle class=\"observed\" cx=\"" << num(x(p.dose)) << "\" cy=\"" << num(y(p.value)) << "\" r=\""
        << num(r) << "\" fill=\"" << options.point_color << "\" fill-opacity=\"0.6\"/>\n";
  }

  svg << "<line x1=\"80\" y1=\"480\" x2=\"760\" y2=\"480\" stroke=\"#000000\"/>\n"
      << "<line x1=\"80\" y1=\"480\" x2=\"80\" y2=\"40\" stroke=\"#000000\"/>\n";
  for (double t : nice_ticks(x_lo, x_hi)) {
    svg << "<text x=\"" << num(x(t)) << "\" y=\"498\" font-size=\"12\" text-anchor=\"middle\">" << tick_label(t)
        << "</text>\n";
  }
  for (double t : nice_ticks(y_lo, y_hi)) {
    svg << "<text x=\"72\" y=\"" << num(y(t) + 4.0) << "\" font-size=\"12\" text-anchor=\"end\">" << tick_label(t)
        << "</text>\n";
  }
  svg << "<text x=\"420\" y=\"530\" font-size=\"14\" text-anchor=\"middle\">" << escape_xml(options.xlab)
      << "</text>\n"
      << "<text x=\"20\" y=\"260\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 260)\">"
      << escape_xml(options.ylab) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace metabayes
