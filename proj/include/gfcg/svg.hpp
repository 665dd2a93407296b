#pragma once

#include <string>
#include <vector>

namespace gfcg::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool markers = false;  // scatter instead of polyline
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

/// Panels stacked vertically in one standalone SVG document.
std::string render(const std::vector<Panel>& panels);

}  // namespace gfcg::svg
