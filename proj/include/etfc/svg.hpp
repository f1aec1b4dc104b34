#pragma once

#include <string>
#include <vector>

namespace etfc::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 640;
  int height = 400;
};

/// Static line chart. Non-finite points (and non-positive ones on a log axis)
/// are skipped.
std::string line_chart(const std::vector<Series>& series, const ChartOptions& options);

}  // namespace etfc::svg
