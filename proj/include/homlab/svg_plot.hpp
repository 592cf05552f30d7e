#pragma once

#include <string>
#include <vector>

namespace homlab {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional band, same length as y
  std::vector<double> hi;
};

struct BarGroup {
  std::string label;
  std::vector<std::string> bars;
  std::vector<double> values;
};

/// Line chart with optional shaded bands; output bytes depend only on the input.
std::string line_chart_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<PlotSeries>& series, bool log_x, bool log_y);

std::string bar_chart_svg(const std::string& title, const std::string& ylabel,
                          const std::vector<BarGroup>& groups);

}  // namespace homlab
