#pragma once

#include <string>
#include <vector>

namespace esr {

struct PlotSeries {
    std::vector<double> x, y;
    std::string name;
    std::string color = "#1f77b4";
    bool markers = false;  // draw points instead of a line
};

struct PlotSpec {
    std::string title, xlabel, ylabel;
    bool logx = false;  // log10 x-axis (positive x required)
    std::vector<PlotSeries> series;
    std::vector<std::string> provenance;  // embedded as XML comments
};

// Standalone SVG line plot; deterministic output for identical input.
void write_svg_plot(const std::string& path, const PlotSpec& spec);

}  // namespace esr
