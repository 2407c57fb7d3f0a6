#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tslab::cli {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  std::vector<PlotSeries> series;
  // Drawn as dashed vertical lines.
  std::vector<double> asymptotes;
  std::optional<std::string> timestamp;
};

// Self-contained SVG. Points with x <= 0 are dropped on a log axis. Throws
// ContractError when nothing is left to draw.
std::string render_svg(const PlotSpec& spec);

}  // namespace tslab::cli
