#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "ssae/image.hpp"

namespace ssae::data {

enum class AnomalyKind { kNone, kSmallMultifocal, kLargeHomogeneous };

std::string anomaly_kind_name(AnomalyKind kind);
AnomalyKind anomaly_kind_from_name(const std::string& name);

struct SampleMeta {
    std::string subject_id;
    int slice_index = 0;
    AnomalyKind kind = AnomalyKind::kNone;
    std::uint64_t seed = 0;
};

struct Sample {
    Image image;                    // values in [0, 1]; background exactly 0
    std::optional<Image> gt_mask;   // binary, same dims, present iff anomalous
    SampleMeta meta;
};

struct SynthConfig {
    int size = 64;                   // pixels per side
    double ellipse_area_lo = 0.25;   // tissue fraction bounds (of the full frame)
    double ellipse_area_hi = 0.40;
    double axis_ratio_lo = 0.65;     // minor/major semi-axis ratio range
    double axis_ratio_hi = 0.95;
    double texture_amplitude = 0.04; // per-component band-limited texture
    double texture_freq_lo = 2.0;    // cycles per image
    double texture_freq_hi = 6.0;
    int texture_components = 6;
    double gradient_amplitude = 0.10;

    AnomalyKind anomaly = AnomalyKind::kNone;
    double anomaly_delta = 0.30;     // intensity bump, normalized units
    int blob_count_lo = 1;           // small-multifocal
    int blob_count_hi = 8;
    double blob_radius_lo = 1.0;     // px at size 64, scaled with size/64
    double blob_radius_hi = 4.0;
    double region_radius_lo = 8.0;   // large-homogeneous, px at size 64
    double region_radius_hi = 16.0;
    int placement_retries = 100;

    std::uint64_t seed = 0;
};

// Deterministic-by-seed phantom: smooth elliptical tissue region on an
// exactly-zero background, low-frequency intensity gradient, band-limited
// texture. Values in [0, 1], tissue strictly positive. Empty ground truth.
Sample synth_healthy(const SynthConfig& config);

// Adds hyperintense anomalies per config.anomaly and marks as ground truth
// every pixel whose intensity moved by more than half the delta. kind=none
// returns the sample unchanged.
Sample inject_anomaly(Sample sample, const SynthConfig& config);

// Divides by the 98th percentile of the nonzero values (linear-interpolation
// order statistic), then clips to [0, 1]. Throws on all-zero input.
Image normalize_p98(const Image& image);

// Percentile over nonzero values only; p in [0, 100].
double nonzero_percentile(const Image& image, double p);

// Keeps slices whose nonzero-pixel fraction is at least `min_fraction`.
std::vector<Image> slice_filter(const std::vector<Image>& slices, double min_fraction = 0.05);

}  // namespace ssae::data
