#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "popart/core.hpp"

namespace popart::bench {

struct SeriesPoint {
  double x;
  double mean;
  double sd;
};

struct Series {
  std::string label;
  std::vector<SeriesPoint> points;
};

namespace detail {

inline std::string fmt(double v, const char* spec = "%.1f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0})
    if (f * mag >= raw) {
      step = f * mag;
      break;
    }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) ticks.push_back(t);
  return ticks;
}

}  // namespace detail

/// Static 800x600 line chart: one line per series, shaded mean +- sd band.
inline std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<Series>& series) {
  constexpr double W = 800, H = 600, L = 80, R = 180, T = 50, B = 60;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      if (!std::isfinite(p.mean)) continue;
      const double sd = std::isfinite(p.sd) ? p.sd : 0.0;
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.mean - sd);
      y1 = std::max(y1, p.mean + sd);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;

  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  using detail::fmt;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" viewBox=\"0 0 800 600\">\n";
  svg << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n";
  svg << "<text x=\"400\" y=\"28\" font-family=\"sans-serif\" font-size=\"18\" text-anchor=\"middle\">"
      << detail::escape_xml(title) << "</text>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (double t : detail::nice_ticks(x0, x1)) {
    svg << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(H - B) << "\" x2=\"" << fmt(px(t)) << "\" y2=\""
        << fmt(T) << "\" stroke=\"#e5e5e5\"/>\n";
    svg << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(H - B + 18) << "\" text-anchor=\"middle\">"
        << fmt(t, "%g") << "</text>\n";
  }
  for (double t : detail::nice_ticks(y0, y1)) {
    svg << "<line x1=\"" << fmt(L) << "\" y1=\"" << fmt(py(t)) << "\" x2=\"" << fmt(W - R) << "\" y2=\""
        << fmt(py(t)) << "\" stroke=\"#e5e5e5\"/>\n";
    svg << "<text x=\"" << fmt(L - 6) << "\" y=\"" << fmt(py(t) + 4) << "\" text-anchor=\"end\">" << fmt(t, "%g")
        << "</text>\n";
  }
  svg << "<rect x=\"" << fmt(L) << "\" y=\"" << fmt(T) << "\" width=\"" << fmt(W - L - R) << "\" height=\""
      << fmt(H - T - B) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << fmt((L + W - R) / 2) << "\" y=\"" << fmt(H - 15) << "\" text-anchor=\"middle\">"
      << detail::escape_xml(x_label) << "</text>\n";
  svg << "<text transform=\"translate(20," << fmt((T + H - B) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::escape_xml(y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = palette[k % std::size(palette)];
    std::vector<SeriesPoint> pts;
    for (const auto& p : series[k].points)
      if (std::isfinite(p.mean)) pts.push_back(p);
    if (!pts.empty()) {
      std::string upper, lower, line;
      for (const auto& p : pts) {
        const double sd = std::isfinite(p.sd) ? p.sd : 0.0;
        upper += fmt(px(p.x)) + "," + fmt(py(p.mean + sd)) + " ";
        line += fmt(px(p.x)) + "," + fmt(py(p.mean)) + " ";
      }
      for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
        const double sd = std::isfinite(it->sd) ? it->sd : 0.0;
        lower += fmt(px(it->x)) + "," + fmt(py(it->mean - sd)) + " ";
      }
      svg << "<polygon points=\"" << upper << lower << "\" fill=\"" << color
          << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
      svg << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
      for (const auto& p : pts)
        svg << "<circle cx=\"" << fmt(px(p.x)) << "\" cy=\"" << fmt(py(p.mean)) << "\" r=\"3\" fill=\"" << color
            << "\"/>\n";
    }
    const double ly = T + 20 + 22.0 * static_cast<double>(k);
    svg << "<line x1=\"" << fmt(W - R + 15) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(W - R + 40) << "\" y2=\""
        << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
    svg << "<text x=\"" << fmt(W - R + 46) << "\" y=\"" << fmt(ly + 4) << "\">" << detail::escape_xml(series[k].label)
        << "</text>\n";
  }
  svg << "</g>\n</svg>\n";
  return svg.str();
}

inline void write_svg_file(const std::string& path, const std::string& markup) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write '" + path + "'");
  out << markup;
}

}  // namespace popart::bench
