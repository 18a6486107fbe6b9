#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace jtanet::cli {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 760;
  int height = 460;
  bool log_y = false;
};

/// Standalone SVG line chart with axes, ticks and a legend.
std::string line_chart_svg(const std::vector<Series>& series, const ChartOptions& options);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace jtanet::cli
