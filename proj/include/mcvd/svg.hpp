#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mcvd::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;  ///< non-finite values break the line
    std::string color;      ///< empty picks from the palette by position
    bool dashed = false;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::optional<double> y_min;  ///< overrides the lower end of the data range
    std::optional<double> y_max;
};

/// Static SVG 1.1 document with axes, ticks, one polyline per series and a legend.
std::string render(const LineChart& chart);

}  // namespace mcvd::svg
