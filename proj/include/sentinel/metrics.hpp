#pragma once

#include <string>
#include <vector>

#include "sentinel/detector.hpp"

namespace sentinel {

// Mann-Whitney AUROC with 0.5 credit per tie. Throws UndefinedMetric when
// either class is missing.
double auroc(const std::vector<double>& scores, const std::vector<bool>& labels);

enum class RenderFormat { Ansi, Html };

// Token heatmap for every flagged agent. Intensity is max(0, s_exp)
// rescaled to [0,1] per agent; tokens are emitted verbatim (HTML-escaped in
// HTML mode).
std::string render_explanation(const ScoreReport& report, RenderFormat format);

} // namespace sentinel
