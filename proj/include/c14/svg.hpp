#pragma once

// Minimal static SVG charts: axes, polylines, point markers, and a gray-level
// heat map for 2-D densities.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "io.hpp"

namespace c14::svg {

struct Series {
  std::string name;
  std::vector<double> x, y;
  bool points = false;
  std::string color = "#1f4e79";
};

struct Plot {
  std::string title, xlabel, ylabel;
  std::vector<Series> series;
  double width = 640, height = 420;
};

namespace detail {

struct Frame {
  double x0, x1, y0, y1;
  double left = 60, right = 20, top = 30, bottom = 45, w = 0, h = 0;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * (w - left - right); }
  double py(double y) const { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); }
};

inline std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline void axes(std::ostringstream& o, const Frame& f, const std::string& title, const std::string& xl,
                 const std::string& yl) {
  o << "<rect x='0' y='0' width='" << f.w << "' height='" << f.h << "' fill='white'/>\n";
  o << "<line x1='" << f.left << "' y1='" << f.h - f.bottom << "' x2='" << f.w - f.right << "' y2='" << f.h - f.bottom
    << "' stroke='black'/>\n";
  o << "<line x1='" << f.left << "' y1='" << f.top << "' x2='" << f.left << "' y2='" << f.h - f.bottom
    << "' stroke='black'/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0, yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    o << "<text x='" << io::fmt(f.px(xv), 1) << "' y='" << f.h - f.bottom + 15
      << "' font-size='10' text-anchor='middle'>" << io::fmt(xv, 1) << "</text>\n";
    o << "<text x='" << f.left - 5 << "' y='" << io::fmt(f.py(yv), 1)
      << "' font-size='10' text-anchor='end'>" << io::fmt(yv, 2) << "</text>\n";
  }
  o << "<text x='" << f.w / 2 << "' y='18' font-size='13' text-anchor='middle'>" << esc(title) << "</text>\n";
  o << "<text x='" << f.w / 2 << "' y='" << f.h - 8 << "' font-size='11' text-anchor='middle'>" << esc(xl)
    << "</text>\n";
  o << "<text x='14' y='" << f.h / 2 << "' font-size='11' text-anchor='middle' transform='rotate(-90 14 " << f.h / 2
    << ")'>" << esc(yl) << "</text>\n";
}

}  // namespace detail

inline std::string render(const Plot& p) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) {
    x0 = std::isfinite(x0) ? x0 - 1 : 0;
    x1 = x0 + 2;
  }
  if (!(y1 > y0)) {
    y0 = std::isfinite(y0) ? y0 - 1 : 0;
    y1 = y0 + 2;
  }
  const double pad = 0.05 * (y1 - y0);
  detail::Frame f{x0, x1, y0 - pad, y1 + pad, 60, 20, 30, 45, 0, 0};
  f.w = p.width;
  f.h = p.height;
  std::ostringstream o;
  o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << f.w << "' height='" << f.h << "'>\n";
  detail::axes(o, f, p.title, p.xlabel, p.ylabel);
  double ly = f.top + 5;
  for (const auto& s : p.series) {
    if (s.points) {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
          o << "<circle cx='" << io::fmt(f.px(s.x[i]), 2) << "' cy='" << io::fmt(f.py(s.y[i]), 2)
            << "' r='2.5' fill='" << s.color << "'/>\n";
    } else {
      o << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
      for (std::size_t i = 0; i < s.x.size(); ++i)
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
          o << io::fmt(f.px(s.x[i]), 2) << ',' << io::fmt(f.py(s.y[i]), 2) << ' ';
      o << "'/>\n";
    }
    if (!s.name.empty()) {
      o << "<text x='" << f.w - f.right - 5 << "' y='" << ly << "' font-size='10' text-anchor='end' fill='" << s.color
        << "'>" << detail::esc(s.name) << "</text>\n";
      ly += 13;
    }
  }
  o << "</svg>\n";
  return o.str();
}

// Gray-level map of a 2-D cell-mass grid (darker is denser); `member`, if
// given, outlines the cells of a credible set.
inline std::string heatmap(const GridDensity& g, const std::string& title, const std::string& xl,
                           const std::string& yl, const std::vector<char>* member = nullptr) {
  const auto& a = g.axes.at(0);
  const auto& b = g.axes.at(1);
  detail::Frame f{a.front(), a.back(), b.front(), b.back(), 60, 20, 30, 45, 0, 0};
  f.w = 480;
  f.h = 480;
  const double top = *std::max_element(g.mass.begin(), g.mass.end());
  const double cw = (f.w - f.left - f.right) / static_cast<double>(a.size());
  const double ch = (f.h - f.top - f.bottom) / static_cast<double>(b.size());
  std::ostringstream o;
  o << "<svg xmlns='http://www.w3.org/2000/svg' width='" << f.w << "' height='" << f.h << "'>\n";
  detail::axes(o, f, title, xl, yl);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double m = g.mass[i * b.size() + j];
      if (!(m > 0.0)) continue;
      const int level = 255 - static_cast<int>(std::lround(255.0 * std::sqrt(m / top)));
      if (level >= 250 && !(member && (*member)[i * b.size() + j])) continue;
      const bool in = member && (*member)[i * b.size() + j];
      o << "<rect x='" << io::fmt(f.px(a[i]), 2) << "' y='" << io::fmt(f.py(b[j]) - ch, 2) << "' width='"
        << io::fmt(cw + 0.05, 2) << "' height='" << io::fmt(ch + 0.05, 2) << "' fill='rgb(" << level << ',' << level
        << ',' << level << ")'" << (in ? " stroke='none' opacity='1'" : "") << "/>\n";
    }
  if (member) {
    // Outline: member cells with a non-member right or upper neighbour.
    o << "<g stroke='black' stroke-width='1'>\n";
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (!(*member)[i * b.size() + j]) continue;
        const double x = f.px(a[i]), y = f.py(b[j]);
        if (i + 1 == a.size() || !(*member)[(i + 1) * b.size() + j])
          o << "<line x1='" << io::fmt(x + cw, 2) << "' y1='" << io::fmt(y - ch, 2) << "' x2='" << io::fmt(x + cw, 2)
            << "' y2='" << io::fmt(y, 2) << "'/>\n";
        if (i == 0 || !(*member)[(i - 1) * b.size() + j])
          o << "<line x1='" << io::fmt(x, 2) << "' y1='" << io::fmt(y - ch, 2) << "' x2='" << io::fmt(x, 2)
            << "' y2='" << io::fmt(y, 2) << "'/>\n";
        if (j + 1 == b.size() || !(*member)[i * b.size() + j + 1])
          o << "<line x1='" << io::fmt(x, 2) << "' y1='" << io::fmt(y - ch, 2) << "' x2='" << io::fmt(x + cw, 2)
            << "' y2='" << io::fmt(y - ch, 2) << "'/>\n";
        if (j == 0 || !(*member)[i * b.size() + j - 1])
          o << "<line x1='" << io::fmt(x, 2) << "' y1='" << io::fmt(y, 2) << "' x2='" << io::fmt(x + cw, 2)
            << "' y2='" << io::fmt(y, 2) << "'/>\n";
      }
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace c14::svg
