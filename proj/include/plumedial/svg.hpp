#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace plumedial {

// Minimal static SVG output: a diverging-colour cell map and a polyline
// chart. CSV files remain the authoritative outputs; these are previews.
namespace svg {

inline std::string color_diverging(double v, double scale) {
  // v < 0: blue, v > 0: red, magnitude saturates at scale.
  const double t = std::clamp(scale > 0.0 ? v / scale : 0.0, -1.0, 1.0);
  const int r = t > 0 ? 220 : static_cast<int>(220 + 35 * t);
  const int b = t < 0 ? 220 : static_cast<int>(220 - 35 * t);
  const int g = static_cast<int>(220 - 180 * std::abs(t));
  std::ostringstream c;
  c << "rgb(" << (t > 0 ? 220 : 220 + static_cast<int>(160 * t)) << ',' << g << ','
    << (t < 0 ? 220 : 220 - static_cast<int>(160 * t)) << ")";
  (void)r;
  (void)b;
  return c.str();
}

struct CellMap {
  std::vector<double> xs, ys;   // sorted axis values
  std::vector<double> values;   // row-major [y][x]
  std::string x_label, y_label, title;
};

inline std::string render_cell_map(const CellMap& m) {
  const int nx = static_cast<int>(m.xs.size());
  const int ny = static_cast<int>(m.ys.size());
  const double cell = 36.0, margin = 70.0;
  const double width = margin + nx * cell + 30.0;
  const double height = margin + ny * cell + 60.0;
  double scale = 1e-12;
  for (double v : m.values) scale = std::max(scale, std::abs(v));

  std::ostringstream out;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << margin << "' y='24' font-family='sans-serif' font-size='15'>" << m.title
      << "</text>\n";
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const double v = m.values[static_cast<std::size_t>(iy) * nx + ix];
      const double x = margin + ix * cell;
      const double y = margin + (ny - 1 - iy) * cell;
      out << "<rect x='" << x << "' y='" << y << "' width='" << cell << "' height='" << cell
          << "' fill='" << color_diverging(v, scale) << "' stroke='gray' stroke-width='0.5'/>\n";
      char label[32];
      std::snprintf(label, sizeof label, "%.2f", v);
      out << "<text x='" << x + 3 << "' y='" << y + 21
          << "' font-family='sans-serif' font-size='9'>" << label << "</text>\n";
    }
  }
  for (int ix = 0; ix < nx; ++ix) {
    char label[32];
    std::snprintf(label, sizeof label, "%.2g", m.xs[ix]);
    out << "<text x='" << margin + ix * cell + 4 << "' y='" << margin + ny * cell + 16
        << "' font-family='sans-serif' font-size='10'>" << label << "</text>\n";
  }
  for (int iy = 0; iy < ny; ++iy) {
    char label[32];
    std::snprintf(label, sizeof label, "%.2g", m.ys[iy]);
    out << "<text x='" << margin - 38 << "' y='" << margin + (ny - 1 - iy) * cell + 22
        << "' font-family='sans-serif' font-size='10'>" << label << "</text>\n";
  }
  out << "<text x='" << margin + 0.5 * nx * cell - 20 << "' y='" << margin + ny * cell + 40
      << "' font-family='sans-serif' font-size='12'>" << m.x_label << "</text>\n";
  out << "<text x='16' y='" << margin + 0.5 * ny * cell
      << "' font-family='sans-serif' font-size='12' transform='rotate(-90 16 "
      << margin + 0.5 * ny * cell << ")'>" << m.y_label << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

struct LineChart {
  std::vector<std::vector<double>> series;  // y values, shared x index
  std::vector<std::string> names;
  std::string title, x_label, y_label;
};

inline std::string render_line_chart(const LineChart& chart) {
  const double w = 560.0, h = 360.0, ml = 60.0, mb = 40.0, mt = 36.0, mr = 16.0;
  double lo = 1e300, hi = -1e300;
  std::size_t n = 0;
  for (const auto& s : chart.series) {
    n = std::max(n, s.size());
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};

  std::ostringstream out;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << ml << "' y='22' font-family='sans-serif' font-size='14'>" << chart.title
      << "</text>\n";
  out << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const auto& ys = chart.series[s];
    if (ys.empty()) continue;
    out << "<polyline fill='none' stroke='" << colors[s % 5] << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double x = ml + (w - ml - mr) * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5);
      const double y = h - mb - (h - mb - mt) * (ys[i] - lo) / (hi - lo);
      out << x << ',' << y << ' ';
    }
    out << "'/>\n";
    if (s < chart.names.size())
      out << "<text x='" << w - mr - 150 << "' y='" << mt + 16 * (s + 1)
          << "' font-family='sans-serif' font-size='11' fill='" << colors[s % 5] << "'>"
          << chart.names[s] << "</text>\n";
  }
  char lim[64];
  std::snprintf(lim, sizeof lim, "%.3g", hi);
  out << "<text x='6' y='" << mt + 10 << "' font-family='sans-serif' font-size='10'>" << lim
      << "</text>\n";
  std::snprintf(lim, sizeof lim, "%.3g", lo);
  out << "<text x='6' y='" << h - mb << "' font-family='sans-serif' font-size='10'>" << lim
      << "</text>\n";
  out << "<text x='" << 0.5 * w << "' y='" << h - 10
      << "' font-family='sans-serif' font-size='12'>" << chart.x_label << "</text>\n";
  out << "<text x='14' y='" << 0.5 * h
      << "' font-family='sans-serif' font-size='12' transform='rotate(-90 14 " << 0.5 * h
      << ")'>" << chart.y_label << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace svg
}  // namespace plumedial
