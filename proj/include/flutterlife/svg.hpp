#pragma once

#include <string>
#include <vector>

namespace flutterlife::svg {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::string label;
  std::string color = "#1f6fb4";
  bool markers = false;   // draw point markers instead of / in addition to a line
  bool line = true;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 720;
  int height = 480;
};

// Writes a standalone line/scatter plot. Inputs with non-finite values are
// skipped point-wise.
void write_line_plot(const std::string& path, const PlotSpec& spec,
                     const std::vector<Series>& series);

}  // namespace flutterlife::svg
