#pragma once

#include <string>
#include <vector>

namespace gaplab::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
};

/// Standalone SVG documents. Non-finite points are skipped.
std::string line_plot(const Axes& axes, const std::vector<Series>& series);
std::string scatter_plot(const Axes& axes, const std::vector<Series>& series);
/// One histogram per series, drawn from `Series::x` over shared bins.
std::string histogram(const Axes& axes, const std::vector<Series>& series, int bins = 40);

}  // namespace gaplab::svg
