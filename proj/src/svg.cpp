#include "marl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace marl::plot {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 190, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  } else {
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
}

std::string header(const Axes& axes) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(kHeight) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape_xml(axes.title) +
       "</text>\n";
  return s;
}

std::string axes_box(const Frame& f, const Axes& axes) {
  std::string s;
  const double left = kLeft, right = kWidth - kRight, top = kTop, bottom = kHeight - kBottom;
  s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(right - left) + "\" height=\"" +
       fmt(bottom - top) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    s += "<text x=\"" + fmt(f.px(xv)) + "\" y=\"" + fmt(bottom + 16) + "\" text-anchor=\"middle\">" + fmt(xv) + "</text>\n";
    s += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(f.py(yv) + 4) + "\" text-anchor=\"end\">" + fmt(yv) + "</text>\n";
    s += "<line x1=\"" + fmt(left) + "\" x2=\"" + fmt(right) + "\" y1=\"" + fmt(f.py(yv)) + "\" y2=\"" + fmt(f.py(yv)) +
         "\" stroke=\"#eee\"/>\n";
  }
  s += "<text x=\"" + fmt((left + right) / 2) + "\" y=\"" + fmt(kHeight - 18) + "\" text-anchor=\"middle\">" +
       escape_xml(axes.x_label) + "</text>\n";
  s += "<text transform=\"translate(18," + fmt((top + bottom) / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape_xml(axes.y_label) + "</text>\n";
  return s;
}

}  // namespace

std::string escape_xml(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string line_chart(const Axes& axes, std::span<const Series> series) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const Series& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
    for (double v : s.lower) y0 = std::min(y0, v);
    for (double v : s.upper) y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!(x1 > x0)) x1 = x0 + 1;
  widen(y0, y1);
  const Frame f{x0, x1, y0, y1};

  std::string svg = header(axes) + axes_box(f, axes);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (!s.lower.empty() && s.lower.size() == s.x.size() && s.upper.size() == s.x.size()) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) pts += fmt(f.px(s.x[i])) + "," + fmt(f.py(s.upper[i])) + " ";
      for (std::size_t i = s.x.size(); i-- > 0;) pts += fmt(f.px(s.x[i])) + "," + fmt(f.py(s.lower[i])) + " ";
      svg += "<polygon points=\"" + pts + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) pts += fmt(f.px(s.x[i])) + "," + fmt(f.py(s.y[i])) + " ";
    svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.8\"/>\n";
    const double ly = kTop + 14 + 18 * static_cast<double>(k);
    const double lx = kWidth - kRight + 14;
    svg += "<line x1=\"" + fmt(lx) + "\" x2=\"" + fmt(lx + 20) + "\" y1=\"" + fmt(ly - 4) + "\" y2=\"" + fmt(ly - 4) +
           "\" stroke=\"" + color + "\" stroke-width=\"3\"/>\n";
    svg += "<text x=\"" + fmt(lx + 26) + "\" y=\"" + fmt(ly) + "\">" + escape_xml(s.label) + "</text>\n";
  }
  return svg + "</svg>\n";
}

std::string interval_chart(const Axes& axes, std::span<const IntervalRow> rows) {
  double x0 = INFINITY, x1 = -INFINITY;
  for (const IntervalRow& r : rows) x0 = std::min({x0, r.low, r.value}), x1 = std::max({x1, r.high, r.value});
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  widen(x0, x1);
  const double n = std::max<double>(1.0, static_cast<double>(rows.size()));
  const Frame f{x0, x1, 0.0, n};

  std::string svg = header(axes);
  const double left = kLeft, right = kWidth - kRight, top = kTop, bottom = kHeight - kBottom;
  svg += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(right - left) + "\" height=\"" +
         fmt(bottom - top) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    svg += "<text x=\"" + fmt(f.px(xv)) + "\" y=\"" + fmt(bottom + 16) + "\" text-anchor=\"middle\">" + fmt(xv) + "</text>\n";
  }
  svg += "<text x=\"" + fmt((left + right) / 2) + "\" y=\"" + fmt(kHeight - 18) + "\" text-anchor=\"middle\">" +
         escape_xml(axes.x_label) + "</text>\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const IntervalRow& r = rows[k];
    const double y = f.py(static_cast<double>(k) + 0.5);
    const char* color = kPalette[k % std::size(kPalette)];
    svg += "<line x1=\"" + fmt(f.px(r.low)) + "\" x2=\"" + fmt(f.px(r.high)) + "\" y1=\"" + fmt(y) + "\" y2=\"" + fmt(y) +
           "\" stroke=\"" + color + "\" stroke-width=\"6\" stroke-opacity=\"0.5\"/>\n";
    svg += "<circle cx=\"" + fmt(f.px(r.value)) + "\" cy=\"" + fmt(y) + "\" r=\"4\" fill=\"" + color + "\"/>\n";
    svg += "<text x=\"" + fmt(right + 8) + "\" y=\"" + fmt(y + 4) + "\">" + escape_xml(r.label) + "</text>\n";
  }
  return svg + "</svg>\n";
}

}  // namespace marl::plot
