#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ssae/errors.hpp"

namespace ssae {

// Row-major 2D grid of doubles. The universal pixel container for inputs,
// pyramid levels, bands, residuals and masks.
class Image {
public:
    Image() = default;

    Image(int width, int height, double fill = 0.0)
        : width_(width), height_(height),
          data_(check_dims(width, height), fill) {}

    Image(int width, int height, std::vector<double> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (data_.size() != check_dims(width, height)) {
            throw ShapeError("Image: data length " + std::to_string(data_.size()) +
                             " != " + std::to_string(width) + "x" + std::to_string(height));
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

private:
    static std::size_t check_dims(int width, int height) {
        if (width < 1 || height < 1) {
            throw ShapeError("Image: dimensions must be >= 1, got " +
                             std::to_string(width) + "x" + std::to_string(height));
        }
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

inline double max_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("max_abs_diff: shape mismatch");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

inline double max_abs(const Image& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

inline double mean_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("mean_abs_diff: shape mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

}  // namespace ssae
