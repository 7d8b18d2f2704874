#pragma once

#include <span>
#include <string>
#include <vector>

// Static SVG charts for curves, profiles and interval tables.
namespace marl::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  // Optional shaded band; same length as x when present.
  std::vector<double> lower;
  std::vector<double> upper;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
};

std::string line_chart(const Axes& axes, std::span<const Series> series);

struct IntervalRow {
  std::string label;
  double value = 0.0;
  double low = 0.0;
  double high = 0.0;
};

// Horizontal point-and-interval chart, one row per entry.
std::string interval_chart(const Axes& axes, std::span<const IntervalRow> rows);

std::string escape_xml(const std::string& text);

}  // namespace marl::plot
