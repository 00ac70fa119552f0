#pragma once

#include "vmckit/types.hpp"

#include <string>
#include <vector>

namespace vmckit {

struct PlotSeries {
  std::string name;
  Vector x;
  Vector y;
};

/// Line plot description. Log axes drop nonpositive points.
struct Plot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
  std::vector<PlotSeries> series;
  std::vector<std::string> notes;  ///< printed under the title
};

/// Self-contained SVG document. Coordinates are printed with two decimals, so the
/// bytes depend only on the input values.
std::string render_svg(const Plot& plot);

}  // namespace vmckit
