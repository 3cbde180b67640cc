#pragma once

#include <filesystem>
#include <string>

#include "ssae/metrics.hpp"

namespace ssae::report {

// Standalone SVG rendering of a precision-recall curve: axes, the stepwise
// polyline, and the AUPRC in the title. No plotting dependencies.
std::string pr_curve_svg(const metrics::PRCurve& curve, const std::string& title);

void write_pr_curve_svg(const std::filesystem::path& path, const metrics::PRCurve& curve,
                        const std::string& title);

}  // namespace ssae::report
