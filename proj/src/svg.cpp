#include "flutterlife/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "flutterlife/errors.hpp"

namespace flutterlife::svg {

namespace {

struct Bounds {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool ok() const { return lo <= hi; }
};

// Round tick spacing to 1/2/5 * 10^k.
double nice_step(double span, int target_ticks) {
  const double raw = span / std::max(1, target_ticks);
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  if (r < 1.5) return mag;
  if (r < 3.5) return 2.0 * mag;
  if (r < 7.5) return 5.0 * mag;
  return 10.0 * mag;
}

std::string fmt(double v) {
  char buf[48];
  if (v == 0.0) return "0";
  const double a = std::fabs(v);
  if (a >= 1e5 || a < 1e-3) {
    std::snprintf(buf, sizeof(buf), "%.2e", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.6g", v);
  }
  return buf;
}

}  // namespace

void write_line_plot(const std::string& path, const PlotSpec& spec,
                     const std::vector<Series>& series) {
  Bounds bx, by;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      double y = s.y[i];
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      if (spec.log_y) {
        if (!(y > 0.0)) continue;
        y = std::log10(y);
      }
      bx.add(s.x[i]);
      by.add(y);
    }
  }
  if (!bx.ok() || !by.ok()) throw DataError("write_line_plot: no finite data to plot");
  if (bx.hi == bx.lo) {
    bx.lo -= 1.0;
    bx.hi += 1.0;
  }
  if (by.hi == by.lo) {
    by.lo -= 1.0;
    by.hi += 1.0;
  }
  const double pad_y = 0.06 * (by.hi - by.lo);
  by.lo -= pad_y;
  by.hi += pad_y;

  const int w = spec.width, h = spec.height;
  const int ml = 84, mr = 24, mt = 42, mb = 56;
  const double pw = w - ml - mr, ph = h - mt - mb;
  auto px = [&](double x) { return ml + pw * (x - bx.lo) / (bx.hi - bx.lo); };
  auto py = [&](double yv) {
    const double y = spec.log_y ? std::log10(yv) : yv;
    return mt + ph * (1.0 - (y - by.lo) / (by.hi - by.lo));
  };

  std::ofstream out(path);
  if (!out) throw DataError("write_line_plot: cannot write '" + path + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
         "font-family=\"sans-serif\">" << spec.title << "</text>\n";

  // Axis frame.
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";

  // X ticks.
  const double sx = nice_step(bx.hi - bx.lo, 6);
  for (double t = std::ceil(bx.lo / sx) * sx; t <= bx.hi + 1e-12 * sx; t += sx) {
    const double x = px(t);
    out << "<line x1=\"" << x << "\" y1=\"" << mt + ph << "\" x2=\"" << x << "\" y2=\""
        << mt + ph + 5 << "\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << mt + ph + 20
        << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(t)
        << "</text>\n";
  }
  // Y ticks.
  const double sy = nice_step(by.hi - by.lo, 6);
  for (double t = std::ceil(by.lo / sy) * sy; t <= by.hi + 1e-12 * sy; t += sy) {
    const double y = mt + ph * (1.0 - (t - by.lo) / (by.hi - by.lo));
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
        << "\" stroke=\"#444\"/>\n";
    const std::string label = spec.log_y ? ("1e" + fmt(t)) : fmt(t);
    out << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << label
        << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h - 14
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
      << spec.x_label << "</text>\n";
  out << "<text x=\"18\" y=\"" << mt + ph / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
         "transform=\"rotate(-90 18 " << mt + ph / 2 << ")\">" << spec.y_label << "</text>\n";

  // Series.
  for (const auto& s : series) {
    if (s.line) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        if (spec.log_y && !(s.y[i] > 0.0)) continue;
        out << px(s.x[i]) << "," << py(s.y[i]) << " ";
      }
      out << "\"/>\n";
    }
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        if (spec.log_y && !(s.y[i] > 0.0)) continue;
        out << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i])
            << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
      }
    }
  }

  // Legend.
  int ly = mt + 14;
  for (const auto& s : series) {
    if (s.label.empty()) continue;
    out << "<line x1=\"" << ml + 12 << "\" y1=\"" << ly << "\" x2=\"" << ml + 36 << "\" y2=\""
        << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << ml + 42 << "\" y=\"" << ly + 4
        << "\" font-size=\"12\" font-family=\"sans-serif\">" << s.label << "</text>\n";
    ly += 18;
  }
  out << "</svg>\n";
}

}  // namespace flutterlife::svg
