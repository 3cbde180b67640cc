#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ssae/image.hpp"

namespace ssae::metrics {

struct PRPoint {
    double recall = 0.0;
    double precision = 0.0;
    double threshold = 0.0;
};

struct PRCurve {
    std::vector<PRPoint> points;  // one per distinct-score cut, recall non-decreasing
    double auprc = 0.0;
};

// Precision-recall curve over pixel scores. Cuts at every distinct score
// (descending, ties pooled); AUPRC by step-wise interpolation
// sum (R_i - R_{i-1}) * P_i. Throws when no positive label exists.
PRCurve pr_curve(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

// 2|A^B| / (|A| + |B|); both-empty convention: 1.0.
double dice(const Image& mask, const Image& ground_truth);

// Greedy threshold search: dataset-wide DICE pooled over all pixels,
// candidates are every distinct score value (mask = scores > t) plus +inf;
// ties resolve to the lowest threshold.
std::pair<double, double> ceiling_dice(const std::vector<double>& scores,
                                       const std::vector<std::uint8_t>& labels);

struct ReconErrorStats {
    std::vector<double> per_image_mean;  // mean |I - I-hat| per image
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

// Pixel-wise l1 fidelity over matched (input, reconstruction) pairs at one
// resolution; corpus statistics via linearly interpolated order statistics.
ReconErrorStats recon_error_stats(const std::vector<Image>& inputs,
                                  const std::vector<Image>& reconstructions);

// Linearly interpolated order statistic of a sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace ssae::metrics
