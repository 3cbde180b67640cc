#pragma once

#include <array>
#include <vector>

#include "ssae/image.hpp"

namespace ssae::pyramid {

// Length-5 separable smoothing kernel. Taps are the Gaussian density sampled
// at integer offsets -2..2 and renormalized to sum 1.
struct GaussianKernel1D {
    std::array<double, 5> taps{};
    double sigma = 0.0;
};

// Base low-pass image plus high-frequency bands, finest first.
// highs[k] has the dimensions of the source divided by 2^k; base by 2^levels.
struct LaplacianPyramid {
    int levels = 0;               // number of high-frequency bands
    Image base;                   // coarsest low-pass level
    std::vector<Image> highs;     // bands 0 (finest) .. levels-1
};

// Inverse standard-normal CDF, |error| < 1e-14 over (0, 1).
double inverse_normal_cdf(double p);

// Largest-sigma length-5 kernel whose [-2.5, 2.5] span covers at least
// `coverage` of the Gaussian mass. Requires 0.5 < coverage < 1.
GaussianKernel1D gaussian_kernel(double coverage);

// Separable smoothing (horizontal pass then vertical pass) with
// mirror-about-edge-pixel boundary handling. Preserves constants exactly.
Image smooth(const Image& img, const GaussianKernel1D& kernel);

// Keeps pixels at even row/column indices. Requires even dimensions.
Image downsample(const Image& img);

// Doubles both dimensions; output pixel p samples source coordinate
// (p + 0.5)/2 - 0.5 with bilinear interpolation and edge clamping.
Image upsample(const Image& img);

// I_0 = x; I_k = downsample(smooth(I_{k-1})); H_k = I_k - upsample(I_{k+1}).
// Dimensions must be divisible by 2^levels; no implicit padding.
LaplacianPyramid build_pyramid(const Image& x, int levels, const GaussianKernel1D& kernel);

// Recursive inverse: a_K = base; a_k = upsample(a_{k+1}) + highs[k].
// Exact up to floating round-off by construction.
Image reconstruct(const LaplacianPyramid& pyr);

// The smoothed/decimated level images [I_0 .. I_K] from the same recursion
// as build_pyramid; used as training and evaluation targets.
std::vector<Image> level_images(const Image& x, int levels, const GaussianKernel1D& kernel);

// Mirror-about-edge-pixel index fold, shared by smoothing and the
// convolution padding in the autodiff module.
inline int mirror_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n - 2;
    int m = i % period;
    if (m < 0) m += period;
    if (m >= n) m = period - m;
    return m;
}

}  // namespace ssae::pyramid
