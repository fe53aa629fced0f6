#pragma once

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "hashcond/core/errors.hpp"
#include "hashcond/core/serialize.hpp"

namespace hashcond {

// Plain-text table with left-aligned first column and right-aligned numbers.
inline std::string format_table(const std::vector<std::string>& headers,
                                const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width(headers.size());
  for (size_t c = 0; c < headers.size(); ++c) width[c] = headers[c].size();
  for (const auto& row : rows) {
    if (row.size() != headers.size()) throw ValidationError("table row width mismatch");
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out << "  ";
      if (c == 0)
        out << std::left << std::setw((int)width[c]) << row[c];
      else
        out << std::right << std::setw((int)width[c]) << row[c];
    }
    out << "\n";
  };
  emit(headers);
  std::vector<std::string> rule;
  for (size_t c = 0; c < headers.size(); ++c) rule.push_back(std::string(width[c], '-'));
  emit(rule);
  for (const auto& row : rows) emit(row);
  return out.str();
}

inline std::string fmt_num(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline const char* plot_color(size_t i) {
  static const char* palette[] = {"#2062a8", "#c2452d", "#2c8c4b", "#8451a0",
                                  "#b07d18", "#3a3a3a"};
  return palette[i % 6];
}

}  // namespace detail

// Static line chart; enough for (time, mAP) curves without a plotting stack.
inline std::string svg_line_chart(const std::vector<PlotSeries>& series,
                                  const std::string& x_label, const std::string& y_label,
                                  const std::string& title) {
  const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!any) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        any = true;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "' font-family='sans-serif' font-size='12'>\n";
  svg << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  svg << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";
  // axes with 5 ticks each
  svg << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='" << H - B
      << "' stroke='black'/>\n";
  svg << "<line x1='" << L << "' y1='" << T << "' x2='" << L << "' y2='" << H - B
      << "' stroke='black'/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = xmin + (xmax - xmin) * k / 4, yv = ymin + (ymax - ymin) * k / 4;
    svg << "<text x='" << px(xv) << "' y='" << H - B + 18
        << "' text-anchor='middle'>" << fmt_num(xv, 1) << "</text>\n";
    svg << "<text x='" << L - 8 << "' y='" << py(yv) + 4 << "' text-anchor='end'>"
        << fmt_num(yv, 2) << "</text>\n";
    svg << "<line x1='" << L << "' y1='" << py(yv) << "' x2='" << W - R << "' y2='"
        << py(yv) << "' stroke='#dddddd'/>\n";
  }
  svg << "<text x='" << (L + W - R) / 2 << "' y='" << H - 12
      << "' text-anchor='middle'>" << x_label << "</text>\n";
  svg << "<text x='18' y='" << (T + H - B) / 2 << "' text-anchor='middle' transform='rotate(-90 18 "
      << (T + H - B) / 2 << ")'>" << y_label << "</text>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = detail::plot_color(s);
    svg << "<polyline fill='none' stroke='" << color << "' stroke-width='2' points='";
    for (size_t i = 0; i < series[s].x.size(); ++i)
      svg << px(series[s].x[i]) << "," << py(series[s].y[i]) << " ";
    svg << "'/>\n";
    for (size_t i = 0; i < series[s].x.size(); ++i)
      svg << "<circle cx='" << px(series[s].x[i]) << "' cy='" << py(series[s].y[i])
          << "' r='3' fill='" << color << "'/>\n";
    svg << "<text x='" << W - R - 150 << "' y='" << T + 16 * (double)s + 4 << "' fill='"
        << color << "'>" << series[s].label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline std::string svg_bar_chart(const std::vector<std::string>& labels,
                                 const std::vector<double>& values,
                                 const std::string& y_label, const std::string& title) {
  if (labels.size() != values.size()) throw ValidationError("bar chart label/value mismatch");
  const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 60;
  double ymax = 1e-9;
  for (double v : values) ymax = std::max(ymax, v);
  ymax *= 1.1;
  const double n = (double)std::max<size_t>(1, values.size());
  const double slot = (W - L - R) / n;
  auto py = [&](double y) { return H - B - y / ymax * (H - T - B); };

  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "' font-family='sans-serif' font-size='12'>\n";
  svg << "<rect width='" << W << "' height='" << H << "' fill='white'/>\n";
  svg << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='15'>" << title
      << "</text>\n";
  svg << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='" << H - B
      << "' stroke='black'/>\n";
  svg << "<line x1='" << L << "' y1='" << T << "' x2='" << L << "' y2='" << H - B
      << "' stroke='black'/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = ymax * k / 4;
    svg << "<text x='" << L - 8 << "' y='" << py(yv) + 4 << "' text-anchor='end'>"
        << fmt_num(yv, 2) << "</text>\n";
    svg << "<line x1='" << L << "' y1='" << py(yv) << "' x2='" << W - R << "' y2='"
        << py(yv) << "' stroke='#dddddd'/>\n";
  }
  svg << "<text x='18' y='" << (T + H - B) / 2 << "' text-anchor='middle' transform='rotate(-90 18 "
      << (T + H - B) / 2 << ")'>" << y_label << "</text>\n";
  for (size_t i = 0; i < values.size(); ++i) {
    const double x0 = L + slot * (double)i + slot * 0.15;
    svg << "<rect x='" << x0 << "' y='" << py(values[i]) << "' width='" << slot * 0.7
        << "' height='" << (H - B - py(values[i])) << "' fill='" << detail::plot_color(i)
        << "'/>\n";
    svg << "<text x='" << x0 + slot * 0.35 << "' y='" << py(values[i]) - 5
        << "' text-anchor='middle'>" << fmt_num(values[i], 3) << "</text>\n";
    svg << "<text x='" << x0 + slot * 0.35 << "' y='" << H - B + 18
        << "' text-anchor='middle'>" << labels[i] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

}  // namespace hashcond
