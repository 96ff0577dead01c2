#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tsenas {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    int width = 720;
    int height = 440;
};

/// Standalone SVG document: axes with ticks, one polyline per series and a legend.
std::string render_svg(const LineChart& chart);

}  // namespace tsenas
