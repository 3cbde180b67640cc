#include "ssae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ssae::metrics {

namespace {

std::vector<std::size_t> order_by_descending_score(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

std::size_t count_positives(const std::vector<std::uint8_t>& labels) {
    std::size_t p = 0;
    for (std::uint8_t l : labels) p += (l != 0);
    return p;
}

void check_pair(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("metrics: scores and labels differ in length");
    }
    if (scores.empty()) throw DataError("metrics: empty inputs");
}

}  // namespace

PRCurve pr_curve(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    check_pair(scores, labels);
    const std::size_t total_pos = count_positives(labels);
    if (total_pos == 0) {
        throw DataError("pr_curve: undefined without at least one positive label");
    }
    const std::vector<std::size_t> idx = order_by_descending_score(scores);

    PRCurve curve;
    std::size_t tp = 0, fp = 0;
    double prev_recall = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        const double cut = scores[idx[i]];
        // Pool all samples tied at this score into one cut point.
        while (i < idx.size() && scores[idx[i]] == cut) {
            if (labels[idx[i]] != 0) ++tp; else ++fp;
            ++i;
        }
        PRPoint pt;
        pt.threshold = cut;
        pt.recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        pt.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        curve.auprc += (pt.recall - prev_recall) * pt.precision;
        prev_recall = pt.recall;
        curve.points.push_back(pt);
    }
    return curve;
}

double dice(const Image& mask, const Image& ground_truth) {
    if (!mask.same_shape(ground_truth)) {
        throw ShapeError("dice: dimension mismatch");
    }
    std::size_t a = 0, b = 0, inter = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const bool ma = mask[i] != 0.0;
        const bool gb = ground_truth[i] != 0.0;
        a += ma;
        b += gb;
        inter += (ma && gb);
    }
    if (a + b == 0) return 1.0;  // correct rejection of an empty slice
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

std::pair<double, double> ceiling_dice(const std::vector<double>& scores,
                                       const std::vector<std::uint8_t>& labels) {
    check_pair(scores, labels);
    const std::size_t total_pos = count_positives(labels);
    if (total_pos == 0) {
        throw DataError("ceiling_dice: undefined without at least one positive label");
    }
    const std::vector<std::size_t> idx = order_by_descending_score(scores);

    // Walking thresholds from high to low: before consuming the group with
    // value v, the accumulated counts describe the mask {score > v}.
    double best_dice = 0.0;  // threshold +inf -> empty mask -> dice 0
    double best_threshold = std::numeric_limits<double>::infinity();
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        const double cut = scores[idx[i]];
        const double d = 2.0 * static_cast<double>(tp) /
                         static_cast<double>(tp + fp + total_pos);
        if (d >= best_dice) {  // >= : ties resolve to the lowest threshold
            best_dice = d;
            best_threshold = cut;
        }
        while (i < idx.size() && scores[idx[i]] == cut) {
            if (labels[idx[i]] != 0) ++tp; else ++fp;
            ++i;
        }
    }
    return {best_dice, best_threshold};
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("quantile: empty sample");
    q = std::clamp(q, 0.0, 1.0);
    std::sort(values.begin(), values.end());
    const double rank = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

ReconErrorStats recon_error_stats(const std::vector<Image>& inputs,
                                  const std::vector<Image>& reconstructions) {
    if (inputs.empty() || inputs.size() != reconstructions.size()) {
        throw DataError("recon_error_stats: need matched nonempty input/reconstruction sets");
    }
    ReconErrorStats stats;
    stats.per_image_mean.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        stats.per_image_mean.push_back(mean_abs_diff(inputs[i], reconstructions[i]));
    }
    double acc = 0.0;
    for (double v : stats.per_image_mean) acc += v;
    stats.mean = acc / static_cast<double>(stats.per_image_mean.size());
    stats.median = quantile(stats.per_image_mean, 0.5);
    stats.q1 = quantile(stats.per_image_mean, 0.25);
    stats.q3 = quantile(stats.per_image_mean, 0.75);
    return stats;
}

}  // namespace ssae::metrics
