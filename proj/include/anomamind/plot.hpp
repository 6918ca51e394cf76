#pragma once

#include <string>
#include <vector>

#include "anomamind/protocol.hpp"
#include "anomamind/series.hpp"

namespace anomamind {

struct PlotOptions {
  int width = 900;
  int height = 240;
};

/// Renders the series as an SVG polyline with shaded bands for truth labels
/// (when given) and verdict intervals. Dependency-free text output.
std::string render_svg_plot(const TimeSeries& series,
                            const std::vector<AnomalyVerdict>& verdicts,
                            const std::vector<int>* truth,
                            const PlotOptions& options = {});

}  // namespace anomamind
