#include "ssae/anomaly.hpp"

#include <algorithm>
#include <cmath>

namespace ssae::anomaly {

namespace {

ResidualStack residuals_from(const std::vector<Image>& inputs,
                             const std::vector<Image>& recons) {
    ResidualStack stack;
    stack.residuals.reserve(inputs.size());
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (!inputs[k].same_shape(recons[k])) {
            throw ShapeError("residual_stack: level " + std::to_string(k) + " shape mismatch");
        }
        Image r(inputs[k].width(), inputs[k].height());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = inputs[k][i] - recons[k][i];
        stack.residuals.push_back(std::move(r));
    }
    return stack;
}

double rectify(double v, ScoreMode mode) {
    return mode == ScoreMode::kAbsolute ? std::abs(v) : std::max(v, 0.0);
}

}  // namespace

ResidualStack residual_stack(const models::ScaleSpaceModel& model, const Image& x) {
    const std::vector<Image> inputs =
        pyramid::level_images(x, model.levels(), model.kernel());
    return residuals_from(inputs, model.reconstruct_levels(x));
}

ResidualStack residual_stack(const std::vector<const models::LevelModel*>& level_models,
                             const pyramid::GaussianKernel1D& kernel, const Image& x) {
    const int levels = static_cast<int>(level_models.size()) - 1;
    const std::vector<Image> inputs = pyramid::level_images(x, levels, kernel);
    return residuals_from(inputs, models::reconstruct_levels(level_models, kernel, x));
}

Image aggregate(const ResidualStack& stack) {
    if (stack.residuals.size() < 2) {
        throw ContractError("aggregate: stack must hold residuals r_0..r_K with K >= 1");
    }
    Image acc = stack.residuals.back();
    for (int k = static_cast<int>(stack.residuals.size()) - 2; k >= 0; --k) {
        Image up = pyramid::upsample(acc);
        const Image& r = stack.residuals[static_cast<std::size_t>(k)];
        if (!up.same_shape(r)) {
            throw ShapeError("aggregate: level " + std::to_string(k) +
                             " does not have twice the extent of level " + std::to_string(k + 1));
        }
        for (std::size_t i = 0; i < up.size(); ++i) up[i] += r[i];
        acc = std::move(up);
    }
    return acc;
}

Image aggregate_rectified(const ResidualStack& stack, ScoreMode mode) {
    ResidualStack rectified;
    rectified.residuals.reserve(stack.residuals.size());
    for (const Image& r : stack.residuals) {
        Image a(r.width(), r.height());
        for (std::size_t i = 0; i < r.size(); ++i) a[i] = rectify(r[i], mode);
        rectified.residuals.push_back(std::move(a));
    }
    return aggregate(rectified);
}

Image median_filter(const Image& img, int radius) {
    if (radius < 0) throw ConfigError("median_filter: radius must be >= 0");
    if (radius == 0) return img;
    const int w = img.width();
    const int h = img.height();
    const int side = 2 * radius + 1;
    Image out(w, h);
    std::vector<double> window;
    window.reserve(static_cast<std::size_t>(side) * side);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            window.clear();
            for (int dy = -radius; dy <= radius; ++dy) {
                const int yy = pyramid::mirror_index(y + dy, h);
                for (int dx = -radius; dx <= radius; ++dx) {
                    window.push_back(img.at(pyramid::mirror_index(x + dx, w), yy));
                }
            }
            auto mid = window.begin() + window.size() / 2;
            std::nth_element(window.begin(), mid, window.end());
            out.at(x, y) = *mid;
        }
    }
    return out;
}

ScoreMap score_map(const Image& residual, int filter_radius, ScoreMode mode) {
    Image rectified(residual.width(), residual.height());
    for (std::size_t i = 0; i < residual.size(); ++i) {
        rectified[i] = rectify(residual[i], mode);
    }
    ScoreMap map;
    map.scores = median_filter(rectified, filter_radius);
    map.mode = mode;
    map.filter_radius = filter_radius;
    return map;
}

SegmentationMask binarize(const ScoreMap& scores, double threshold) {
    if (!std::isfinite(threshold)) throw ConfigError("binarize: threshold must be finite");
    SegmentationMask out;
    out.threshold = threshold;
    out.mask = Image(scores.scores.width(), scores.scores.height());
    for (std::size_t i = 0; i < out.mask.size(); ++i) {
        out.mask[i] = scores.scores[i] > threshold ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace ssae::anomaly
