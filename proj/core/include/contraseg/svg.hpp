// Static SVG emission: per-video label timelines (ground truth above
// prediction) and metric/loss-vs-epoch curves. Deterministic output so the
// images are golden-file testable.

#pragma once

#include <string>
#include <vector>

namespace contraseg::svg {

// Hex color assigned to a class id; stable across runs.
std::string class_color(int class_id);

// Two horizontal color bands, one rect per segment: GT row above pred row.
std::string timeline_svg(const std::vector<int>& gt, const std::vector<int>& pred,
                         const std::string& title = "");

struct Series {
    std::string name;
    std::vector<double> values;  // one value per epoch
};

// Simple multi-series line chart; x axis is the epoch index.
std::string curve_svg(const std::vector<Series>& series, const std::string& title = "");

}  // namespace contraseg::svg
