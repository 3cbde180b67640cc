#include "ssae/synth.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ssae/rng.hpp"

namespace ssae::data {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTissueFloor = 0.05;  // keeps tissue strictly nonzero
constexpr double kTissueCeil = 0.75;   // leaves headroom for hyperintense lesions

struct Ellipse {
    double cx, cy, a, b, phi;

    bool contains(double x, double y) const {
        const double dx = x - cx;
        const double dy = y - cy;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double v = -dx * std::sin(phi) + dy * std::cos(phi);
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
};

}  // namespace

std::string anomaly_kind_name(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::kNone: return "none";
        case AnomalyKind::kSmallMultifocal: return "small-multifocal";
        case AnomalyKind::kLargeHomogeneous: return "large-homogeneous";
    }
    throw ContractError("anomaly_kind_name: unknown kind");
}

AnomalyKind anomaly_kind_from_name(const std::string& name) {
    if (name == "none") return AnomalyKind::kNone;
    if (name == "small-multifocal") return AnomalyKind::kSmallMultifocal;
    if (name == "large-homogeneous") return AnomalyKind::kLargeHomogeneous;
    throw ConfigError("unknown anomaly kind '" + name + "'");
}

Sample synth_healthy(const SynthConfig& config) {
    if (config.size < 8) throw ConfigError("synth: size must be >= 8");
    if (!(config.ellipse_area_lo > 0.0 && config.ellipse_area_hi < 0.8 &&
          config.ellipse_area_lo <= config.ellipse_area_hi)) {
        throw ConfigError("synth: implausible ellipse area bounds");
    }
    const int s = config.size;
    Rng rng(mix_seed(config.seed, 0x9ea1));

    // Tissue ellipse: area drawn inside the configured bounds, then the
    // semi-axes follow from the axis ratio. Center jitter stays small enough
    // to keep the ellipse inside the frame.
    const double area_frac = rng.uniform(config.ellipse_area_lo, config.ellipse_area_hi);
    const double ratio = rng.uniform(config.axis_ratio_lo, config.axis_ratio_hi);
    const double area_px = area_frac * s * s;
    Ellipse e;
    e.a = std::sqrt(area_px / (kPi * ratio));
    e.b = e.a * ratio;
    const double margin = std::max(0.0, (s / 2.0 - e.a) * 0.8);
    e.cx = s / 2.0 + rng.uniform(-margin, margin) * 0.25;
    e.cy = s / 2.0 + rng.uniform(-margin, margin) * 0.25;
    e.phi = rng.uniform(0.0, kPi);

    const double base = rng.uniform(0.40, 0.55);
    const double grad_dir = rng.uniform(0.0, 2.0 * kPi);
    const double grad_amp = rng.uniform(0.5, 1.0) * config.gradient_amplitude;
    const double gx = std::cos(grad_dir) / s;
    const double gy = std::sin(grad_dir) / s;

    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves(static_cast<std::size_t>(std::max(0, config.texture_components)));
    for (Wave& w : waves) {
        const double freq = rng.uniform(config.texture_freq_lo, config.texture_freq_hi);
        const double dir = rng.uniform(0.0, 2.0 * kPi);
        w.fx = 2.0 * kPi * freq * std::cos(dir) / s;
        w.fy = 2.0 * kPi * freq * std::sin(dir) / s;
        w.phase = rng.uniform(0.0, 2.0 * kPi);
        w.amp = rng.uniform(0.4, 1.0) * config.texture_amplitude;
    }

    Sample sample;
    sample.meta.kind = AnomalyKind::kNone;
    sample.meta.seed = config.seed;
    sample.image = Image(s, s, 0.0);
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            if (!e.contains(x + 0.5, y + 0.5)) continue;
            double v = base;
            v += grad_amp * ((x - e.cx) * gx + (y - e.cy) * gy) * 2.0;
            for (const Wave& w : waves) {
                v += w.amp * std::cos(w.fx * x + w.fy * y + w.phase);
            }
            sample.image.at(x, y) = std::clamp(v, kTissueFloor, kTissueCeil);
        }
    }
    return sample;
}

Sample inject_anomaly(Sample sample, const SynthConfig& config) {
    if (config.anomaly == AnomalyKind::kNone) return sample;
    if (sample.gt_mask.has_value()) {
        throw ContractError("inject_anomaly: sample already carries an anomaly");
    }
    const int s = sample.image.width();
    const double px_scale = static_cast<double>(s) / 64.0;
    Rng rng(mix_seed(config.seed, 0xa401e51));
    Image before = sample.image;

    std::vector<std::pair<int, int>> tissue;
    tissue.reserve(sample.image.size());
    for (int y = 0; y < sample.image.height(); ++y) {
        for (int x = 0; x < s; ++x) {
            if (sample.image.at(x, y) > 0.0) tissue.emplace_back(x, y);
        }
    }
    if (tissue.empty()) throw DataError("inject_anomaly: sample has no tissue");

    auto core_inside_tissue = [&](int cx, int cy, double radius) {
        const int r = static_cast<int>(std::ceil(radius));
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                if (dx * dx + dy * dy > radius * radius) continue;
                const int x = cx + dx;
                const int y = cy + dy;
                if (x < 0 || y < 0 || x >= s || y >= s) return false;
                if (before.at(x, y) <= 0.0) return false;
            }
        }
        return true;
    };

    auto place = [&](double radius) -> std::pair<int, int> {
        for (int attempt = 0; attempt < config.placement_retries; ++attempt) {
            const auto [x, y] = tissue[static_cast<std::size_t>(
                rng.randint(0, static_cast<std::int64_t>(tissue.size()) - 1))];
            if (core_inside_tissue(x, y, radius)) return {x, y};
        }
        throw DataError("inject_anomaly: could not place anomaly of radius " +
                        std::to_string(radius) + " inside tissue after " +
                        std::to_string(config.placement_retries) + " retries");
    };

    const double delta = config.anomaly_delta;
    if (config.anomaly == AnomalyKind::kSmallMultifocal) {
        const int count = static_cast<int>(rng.randint(config.blob_count_lo, config.blob_count_hi));
        for (int i = 0; i < count; ++i) {
            const double radius =
                rng.uniform(config.blob_radius_lo, config.blob_radius_hi) * px_scale;
            const auto [cx, cy] = place(radius);
            const double sigma = radius / 2.0;
            const int support = static_cast<int>(std::ceil(2.5 * sigma)) + 1;
            for (int dy = -support; dy <= support; ++dy) {
                for (int dx = -support; dx <= support; ++dx) {
                    const int x = cx + dx;
                    const int y = cy + dy;
                    if (x < 0 || y < 0 || x >= s || y >= s) continue;
                    if (sample.image.at(x, y) <= 0.0) continue;  // never brighten background
                    const double d2 = dx * dx + dy * dy;
                    const double bump = delta * std::exp(-d2 / (2.0 * sigma * sigma));
                    sample.image.at(x, y) = std::min(1.0, sample.image.at(x, y) + bump);
                }
            }
        }
    } else {
        const double radius =
            rng.uniform(config.region_radius_lo, config.region_radius_hi) * px_scale;
        const auto [cx, cy] = place(radius);
        const int bound = static_cast<int>(std::ceil(radius)) + 1;
        for (int dy = -bound; dy <= bound; ++dy) {
            for (int dx = -bound; dx <= bound; ++dx) {
                if (dx * dx + dy * dy > radius * radius) continue;
                const int x = cx + dx;
                const int y = cy + dy;
                if (x < 0 || y < 0 || x >= s || y >= s) continue;
                if (sample.image.at(x, y) <= 0.0) continue;
                sample.image.at(x, y) = std::min(1.0, sample.image.at(x, y) + delta);
            }
        }
    }

    Image gt(s, sample.image.height(), 0.0);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        gt[i] = (sample.image[i] - before[i]) > 0.5 * delta ? 1.0 : 0.0;
    }
    sample.gt_mask = std::move(gt);
    sample.meta.kind = config.anomaly;
    return sample;
}

double nonzero_percentile(const Image& image, double p) {
    std::vector<double> nz;
    nz.reserve(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        if (image[i] != 0.0) nz.push_back(image[i]);
    }
    if (nz.empty()) throw DataError("percentile: image has no nonzero values");
    std::sort(nz.begin(), nz.end());
    const double rank = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(nz.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, nz.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return nz[lo] + frac * (nz[hi] - nz[lo]);
}

Image normalize_p98(const Image& image) {
    const double p98 = nonzero_percentile(image, 98.0);
    if (p98 <= 0.0) throw DataError("normalize_p98: nonpositive 98th percentile");
    Image out(image.width(), image.height());
    for (std::size_t i = 0; i < image.size(); ++i) {
        out[i] = std::clamp(image[i] / p98, 0.0, 1.0);
    }
    return out;
}

std::vector<Image> slice_filter(const std::vector<Image>& slices, double min_fraction) {
    std::vector<Image> kept;
    for (const Image& slice : slices) {
        std::size_t nz = 0;
        for (std::size_t i = 0; i < slice.size(); ++i) nz += (slice[i] != 0.0);
        const double fraction = static_cast<double>(nz) / static_cast<double>(slice.size());
        if (fraction >= min_fraction) kept.push_back(slice);
    }
    return kept;
}

}  // namespace ssae::data
