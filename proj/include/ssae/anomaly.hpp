#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ssae/models.hpp"

namespace ssae::anomaly {

// Signed per-level reconstruction residuals r_k = I_k - I-hat_k at their
// native level sizes, plus the full-resolution aggregate once computed.
struct ResidualStack {
    std::vector<Image> residuals;     // r_0 .. r_K
    std::optional<Image> aggregated;  // r_*
};

enum class ScoreMode {
    kAbsolute,      // |r|: hyper- and hypo-intense anomalies both score
    kPositivePart,  // max(r, 0)
};

struct ScoreMap {
    Image scores;            // nonnegative
    std::string provenance;  // "level_k" or "aggregated"
    ScoreMode mode = ScoreMode::kAbsolute;
    int filter_radius = 0;
};

struct SegmentationMask {
    Image mask;  // values in {0, 1}
    double threshold = 0.0;
};

// r_k = I_k - I-hat_k for k = 0..K via the level recursion.
ResidualStack residual_stack(const models::ScaleSpaceModel& model, const Image& x);
ResidualStack residual_stack(const std::vector<const models::LevelModel*>& level_models,
                             const pyramid::GaussianKernel1D& kernel, const Image& x);

// Recursive multi-scale aggregation on the signed residuals:
// a_K = r_K; a_k = upsample(a_{k+1}) + r_k; returns a_0.
Image aggregate(const ResidualStack& stack);

// Ablation: rectify each level before aggregating instead of after.
Image aggregate_rectified(const ResidualStack& stack, ScoreMode mode);

// Median filter (square window of side 2*radius+1, mirror boundary) applied
// to the rectified residual. radius 0 is the identity on the rectification.
ScoreMap score_map(const Image& residual, int filter_radius,
                   ScoreMode mode = ScoreMode::kAbsolute);

// mask = scores > t (strict).
SegmentationMask binarize(const ScoreMap& scores, double threshold);

Image median_filter(const Image& img, int radius);

}  // namespace ssae::anomaly
