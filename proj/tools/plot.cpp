#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "tslab/errors.hpp"

namespace tslab::cli {
namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis {
  double lo;
  double hi;
  bool log;

  double t(double v) const {
    const double a = log ? std::log10(v) : v;
    const double b0 = log ? std::log10(lo) : lo;
    const double b1 = log ? std::log10(hi) : hi;
    return b1 > b0 ? (a - b0) / (b1 - b0) : 0.5;
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
        const double v = std::pow(10.0, e);
        if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) out.push_back(v);
      }
      if (out.empty()) out = {lo, hi};
      return out;
    }
    for (int i = 0; i <= 5; ++i) out.push_back(lo + (hi - lo) * i / 5.0);
    return out;
  }
};

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  std::vector<PlotSeries> series;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : spec.series) {
    PlotSeries kept{s.label, {}};
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y) || (spec.log_x && x <= 0.0)) continue;
      kept.points.emplace_back(x, y);
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
    if (!kept.points.empty()) series.push_back(std::move(kept));
  }
  for (double a : spec.asymptotes) {
    if (!std::isfinite(a)) continue;
    x0 = std::min(x0, a);
    x1 = std::max(x1, a);
  }
  if (series.empty() && spec.asymptotes.empty()) throw ContractError("plot: nothing to draw");
  if (!std::isfinite(y0)) y0 = 0.0, y1 = 1.0;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  if (x1 == x0) x0 = spec.log_x ? x0 / 2 : x0 - 0.5, x1 = spec.log_x ? x1 * 2 : x1 + 0.5;
  const double pad = 0.05 * (y1 - y0);
  const Axis ax{x0, x1, spec.log_x};
  const Axis ay{y0 - pad, y1 + pad, false};
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + ax.t(x) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - ay.t(y)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" data-x-scale=\"" << (spec.log_x ? "log" : "linear") << "\">\n";
  if (spec.timestamp) o << "<!-- generated " << escape(*spec.timestamp) << " -->\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(spec.title) << "</text>\n";
  o << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ax.ticks()) {
    o << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(px(t)) << "\" y2=\""
      << fmt(kTop + ph + 5) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(kTop + ph + 18) << "\" text-anchor=\"middle\" font-size=\"11\">"
      << tick_label(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    o << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(py(t)) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
      << fmt(py(t)) << "\" stroke=\"black\"/>";
    o << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(py(t) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
      << tick_label(t) << "</text>\n";
  }
  o << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 15)
    << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(spec.x_label) << (spec.log_x ? " (log scale)" : "")
    << "</text>\n";
  o << "<text x=\"18\" y=\"" << fmt(kTop + ph / 2) << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
    << fmt(kTop + ph / 2) << ")\">" << escape(spec.y_label) << "</text>\n";
  for (double a : spec.asymptotes) {
    if (!std::isfinite(a)) continue;
    o << "<line class=\"asymptote\" x1=\"" << fmt(px(a)) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(px(a))
      << "\" y2=\"" << fmt(kTop + ph) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < series[i].points.size(); ++k) {
      if (k) o << ' ';
      o << fmt(px(series[i].points[k].first)) << ',' << fmt(py(series[i].points[k].second));
    }
    o << "\"/>\n";
    const double ly = kTop + 14.0 + 18.0 * static_cast<double>(i);
    o << "<line x1=\"" << fmt(kLeft + pw + 10) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(kLeft + pw + 30)
      << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << fmt(kLeft + pw + 35) << "\" y=\"" << fmt(ly) << "\" font-size=\"11\">"
      << escape(series[i].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace tslab::cli
