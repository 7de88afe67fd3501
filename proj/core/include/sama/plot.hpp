#pragma once

#include <span>
#include <string>
#include <vector>

namespace sama {

struct PlotSeries {
    std::string label;
    std::vector<double> values;
};

// Trailing window mean; a constant series stays constant.
std::vector<double> window_mean(std::span<const double> values, int window);

// Pure-text SVG with one polyline per series, axes and a legend. No raster
// dependencies.
std::string render_loss_svg(const std::vector<PlotSeries>& series, const std::string& title);

}  // namespace sama
