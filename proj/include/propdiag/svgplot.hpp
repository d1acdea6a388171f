#pragma once
// svgplot.hpp - tiny SVG chart writer (line and horizontal-bar charts).
// Output is plain text with no timestamps, so replotting with the same data
// is byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace propdiag {

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Step of 1/2/5 x 10^k giving ~5 ticks over the span.
inline double nice_step(double span) {
  if (span <= 0.0) return 1.0;
  double raw = span / 5.0;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double frac = raw / mag;
  double step = frac < 1.5 ? 1.0 : frac < 3.5 ? 2.0 : frac < 7.5 ? 5.0 : 10.0;
  return step * mag;
}

inline const char* series_color(std::size_t i) {
  static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  return palette[i % 8];
}

}  // namespace detail

inline std::string svg_line_chart(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<SvgSeries>& series, int width = 900,
                                  int height = 520, bool log_y = false) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const SvgSeries& s : series)
    for (auto [x, y] : s.points) {
      if (log_y && y <= 0.0) continue;
      double yy = log_y ? std::log10(y) : y;
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = yy;
        any = true;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, yy);
        ymax = std::max(ymax, yy);
      }
    }
  if (!any) {
    xmin = ymin = 0;
    xmax = ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  const double ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) {
    double yy = log_y ? std::log10(y) : y;
    return mt + ph - (yy - ymin) / (ymax - ymin) * ph;
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
         "font-family=\"sans-serif\">"
      << detail::svg_escape(title) << "</text>\n";

  // Axes + ticks.
  out << "<g font-size=\"11\" font-family=\"sans-serif\" fill=\"#333\">\n";
  double xstep = detail::nice_step(xmax - xmin);
  for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax + 1e-9 * xstep; t += xstep) {
    double px = sx(t);
    out << "<line x1=\"" << detail::fmt_coord(px) << "\" y1=\"" << mt << "\" x2=\""
        << detail::fmt_coord(px) << "\" y2=\"" << mt + ph << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << detail::fmt_coord(px) << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\">" << detail::fmt_tick(t) << "</text>\n";
  }
  double ystep = detail::nice_step(ymax - ymin);
  for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax + 1e-9 * ystep; t += ystep) {
    double py = mt + ph - (t - ymin) / (ymax - ymin) * ph;
    out << "<line x1=\"" << ml << "\" y1=\"" << detail::fmt_coord(py) << "\" x2=\"" << ml + pw
        << "\" y2=\"" << detail::fmt_coord(py) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << detail::fmt_coord(py + 4)
        << "\" text-anchor=\"end\">" << (log_y ? "1e" : "") << detail::fmt_tick(t) << "</text>\n";
  }
  out << "</g>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
      << detail::svg_escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" transform=\"rotate(-90 "
         "16 "
      << mt + ph / 2 << ")\">" << detail::svg_escape(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    out << "<polyline fill=\"none\" stroke=\"" << detail::series_color(i)
        << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : series[i].points) {
      if (log_y && y <= 0.0) continue;
      out << detail::fmt_coord(sx(x)) << "," << detail::fmt_coord(sy(y)) << " ";
    }
    out << "\"/>\n";
    if (!series[i].label.empty()) {
      double ly = mt + 14 + 16 * static_cast<double>(i);
      out << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + pw - 126
          << "\" y2=\"" << ly - 4 << "\" stroke=\"" << detail::series_color(i)
          << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << ml + pw - 120 << "\" y=\"" << ly
          << "\" font-size=\"11\" font-family=\"sans-serif\">" << detail::svg_escape(series[i].label)
          << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

inline std::string svg_bar_chart(const std::string& title, const std::string& value_label,
                                 const std::vector<std::string>& labels,
                                 const std::vector<double>& values, int width = 900) {
  const std::size_t n = std::min(labels.size(), values.size());
  const double row_h = 24, ml = 260, mr = 30, mt = 40, mb = 40;
  const int height = static_cast<int>(mt + mb + row_h * static_cast<double>(n));
  double vmax = 0.0, vmin = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    vmax = std::max(vmax, values[i]);
    vmin = std::min(vmin, values[i]);
  }
  if (vmax == vmin) vmax = vmin + 1;
  const double pw = width - ml - mr;
  auto sx = [&](double v) { return ml + (v - std::min(vmin, 0.0)) / (vmax - std::min(vmin, 0.0)) * pw; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
         "font-family=\"sans-serif\">"
      << detail::svg_escape(title) << "</text>\n";
  out << "<g font-size=\"11\" font-family=\"sans-serif\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    double y = mt + row_h * static_cast<double>(i);
    double x0 = sx(0.0), x1 = sx(values[i]);
    out << "<rect x=\"" << detail::fmt_coord(std::min(x0, x1)) << "\" y=\""
        << detail::fmt_coord(y + 4) << "\" width=\"" << detail::fmt_coord(std::abs(x1 - x0))
        << "\" height=\"" << row_h - 8 << "\" fill=\"" << detail::series_color(0) << "\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << detail::fmt_coord(y + row_h / 2 + 4)
        << "\" text-anchor=\"end\">" << detail::svg_escape(labels[i]) << "</text>\n";
    out << "<text x=\"" << detail::fmt_coord(std::max(x0, x1) + 4) << "\" y=\""
        << detail::fmt_coord(y + row_h / 2 + 4) << "\">" << detail::fmt_tick(values[i])
        << "</text>\n";
  }
  out << "</g>\n";
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
      << detail::svg_escape(value_label) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace propdiag
