#pragma once

#include <string>
#include <vector>

namespace pf {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

/// Minimal standalone SVG line/marker plot. The rendered file embeds the
/// plotted numbers as a CSV table inside <metadata>, so the artifact carries
/// its own data.
struct Plot {
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<PlotSeries> series;

  std::string render(int width = 720, int height = 480) const;
};

}  // namespace pf
