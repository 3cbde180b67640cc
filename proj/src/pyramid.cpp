#include "ssae/pyramid.hpp"

#include <cmath>
#include <string>

namespace ssae::pyramid {

namespace {

constexpr double kKernelHalfWidth = 2.5;  // outer boundary of the outermost tap cell

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

}  // namespace

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError("inverse_normal_cdf: p must be in (0,1), got " + std::to_string(p));
    }
    // Acklam's rational approximation, then Halley refinement against erfc.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    for (int it = 0; it < 3; ++it) {
        const double e = normal_cdf(x) - p;
        const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
        x = x - u / (1.0 + x * u / 2.0);
    }
    return x;
}

GaussianKernel1D gaussian_kernel(double coverage) {
    if (!(coverage > 0.5 && coverage < 1.0)) {
        throw ConfigError("gaussian_kernel: coverage must be in (0.5, 1), got " +
                          std::to_string(coverage));
    }
    // The coverage constraint 2*Phi(2.5/sigma) - 1 >= coverage is monotone
    // decreasing in sigma, so the largest admissible sigma attains equality.
    const double z = inverse_normal_cdf(0.5 * (1.0 + coverage));
    GaussianKernel1D k;
    k.sigma = kKernelHalfWidth / z;
    double sum = 0.0;
    for (int i = -2; i <= 2; ++i) {
        const double v = std::exp(-static_cast<double>(i * i) / (2.0 * k.sigma * k.sigma));
        k.taps[i + 2] = v;
        sum += v;
    }
    for (double& t : k.taps) t /= sum;
    return k;
}

Image smooth(const Image& img, const GaussianKernel1D& kernel) {
    const int w = img.width();
    const int h = img.height();
    Image horiz(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t) {
                acc += kernel.taps[t + 2] * img.at(mirror_index(x + t, w), y);
            }
            horiz.at(x, y) = acc;
        }
    }
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -2; t <= 2; ++t) {
                acc += kernel.taps[t + 2] * horiz.at(x, mirror_index(y + t, h));
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

Image downsample(const Image& img) {
    if (img.width() % 2 != 0 || img.height() % 2 != 0) {
        throw ShapeError("downsample: dimensions must be even, got " +
                         std::to_string(img.width()) + "x" + std::to_string(img.height()));
    }
    Image out(img.width() / 2, img.height() / 2);
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            out.at(x, y) = img.at(2 * x, 2 * y);
        }
    }
    return out;
}

Image upsample(const Image& img) {
    const int sw = img.width();
    const int sh = img.height();
    Image out(2 * sw, 2 * sh);
    for (int oy = 0; oy < out.height(); ++oy) {
        const double sy = (oy + 0.5) / 2.0 - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        int y1 = y0 + 1;
        y0 = std::min(std::max(y0, 0), sh - 1);
        y1 = std::min(std::max(y1, 0), sh - 1);
        for (int ox = 0; ox < out.width(); ++ox) {
            const double sx = (ox + 0.5) / 2.0 - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            int x1 = x0 + 1;
            x0 = std::min(std::max(x0, 0), sw - 1);
            x1 = std::min(std::max(x1, 0), sw - 1);
            const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
            const double bot = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
            out.at(ox, oy) = (1.0 - fy) * top + fy * bot;
        }
    }
    return out;
}

namespace {

void check_divisible(const Image& x, int levels) {
    if (levels < 1) {
        throw ConfigError("pyramid: level count must be >= 1, got " + std::to_string(levels));
    }
    const int div = 1 << levels;
    if (x.width() % div != 0 || x.height() % div != 0) {
        throw ShapeError("pyramid: " + std::to_string(x.width()) + "x" +
                         std::to_string(x.height()) + " not divisible by 2^" +
                         std::to_string(levels));
    }
}

Image subtract(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("pyramid: level shape mismatch");
    Image out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Image add(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("pyramid: level shape mismatch");
    Image out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

}  // namespace

std::vector<Image> level_images(const Image& x, int levels, const GaussianKernel1D& kernel) {
    check_divisible(x, levels);
    std::vector<Image> out;
    out.reserve(levels + 1);
    out.push_back(x);
    for (int k = 1; k <= levels; ++k) {
        out.push_back(downsample(smooth(out.back(), kernel)));
    }
    return out;
}

LaplacianPyramid build_pyramid(const Image& x, int levels, const GaussianKernel1D& kernel) {
    const std::vector<Image> lv = level_images(x, levels, kernel);
    LaplacianPyramid pyr;
    pyr.levels = levels;
    pyr.base = lv.back();
    pyr.highs.reserve(levels);
    for (int k = 0; k < levels; ++k) {
        pyr.highs.push_back(subtract(lv[k], upsample(lv[k + 1])));
    }
    return pyr;
}

Image reconstruct(const LaplacianPyramid& pyr) {
    if (static_cast<int>(pyr.highs.size()) != pyr.levels) {
        throw ShapeError("reconstruct: pyramid has " + std::to_string(pyr.highs.size()) +
                         " bands, expected " + std::to_string(pyr.levels));
    }
    Image acc = pyr.base;
    for (int k = pyr.levels - 1; k >= 0; --k) {
        acc = add(upsample(acc), pyr.highs[k]);
    }
    return acc;
}

}  // namespace ssae::pyramid
