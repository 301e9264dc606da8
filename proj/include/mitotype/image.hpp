#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "mitotype/error.hpp"

namespace mitotype {

/// 8-bit interleaved RGB raster, row-major.
class RasterImage {
public:
    RasterImage() = default;
    RasterImage(std::size_t width, std::size_t height, std::uint8_t fill = 0)
        : width_(width), height_(height), samples_(width * height * 3, fill) {
        if (width == 0 || height == 0) throw Error(ErrorCode::invalid_argument, "zero-sized image");
    }
    RasterImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> samples)
        : width_(width), height_(height), samples_(std::move(samples)) {
        if (width == 0 || height == 0) throw Error(ErrorCode::invalid_argument, "zero-sized image");
        if (samples_.size() != width * height * 3)
            throw Error(ErrorCode::invalid_argument, "sample count does not match 3 x width x height");
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t pixel_count() const noexcept { return width_ * height_; }
    bool empty() const noexcept { return samples_.empty(); }

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return samples_[(y * width_ + x) * 3 + c]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return samples_[(y * width_ + x) * 3 + c]; }

    void set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        auto* p = &samples_[(y * width_ + x) * 3];
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    std::span<std::uint8_t> samples() noexcept { return samples_; }
    std::span<const std::uint8_t> samples() const noexcept { return samples_; }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<std::uint8_t> samples_;
};

/// Single-channel raster. Also used as a generic 2-D byte plane.
template <class T>
class Plane {
public:
    using value_type = T;

    Plane() = default;
    Plane(std::size_t width, std::size_t height, T fill = T{})
        : width_(width), height_(height), data_(width * height, fill) {
        if (width == 0 || height == 0) throw Error(ErrorCode::invalid_argument, "zero-sized plane");
    }
    Plane(std::size_t width, std::size_t height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width == 0 || height == 0) throw Error(ErrorCode::invalid_argument, "zero-sized plane");
        if (data_.size() != width * height)
            throw Error(ErrorCode::invalid_argument, "sample count does not match width x height");
    }

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }

    T& at(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
    const T& at(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<T> data_;
};

using GrayImage = Plane<std::uint8_t>;

/// Boolean per-pixel mask; one byte per pixel (0 or 1).
class BitMask : public Plane<std::uint8_t> {
public:
    using Plane::Plane;

    bool test(std::size_t x, std::size_t y) const { return at(x, y) != 0; }
    void set(std::size_t x, std::size_t y, bool v = true) { at(x, y) = v ? 1 : 0; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : values()) n += v != 0;
        return n;
    }

    friend bool operator==(const BitMask&, const BitMask&) = default;
};

template <class A, class B>
bool same_shape(const A& a, const B& b) {
    return a.width() == b.width() && a.height() == b.height();
}

/// Histogram whose masses sum to one. A histogram built from zero counts is
/// flagged empty and carries all-zero masses.
class NormalizedHistogram {
public:
    NormalizedHistogram() = default;

    /// Builds from raw masses or counts; normalizes by their total.
    static NormalizedHistogram from_counts(std::span<const double> counts) {
        check_bins(counts.size());
        NormalizedHistogram h;
        h.mass_.assign(counts.begin(), counts.end());
        double total = 0.0;
        for (double c : counts) {
            if (c < 0.0) throw Error(ErrorCode::invalid_argument, "negative histogram count");
            total += c;
        }
        if (total > 0.0) {
            for (double& m : h.mass_) m /= total;
        } else {
            h.empty_ = true;
        }
        return h;
    }

    static NormalizedHistogram from_counts(std::span<const std::uint64_t> counts) {
        std::vector<double> c(counts.begin(), counts.end());
        return from_counts(std::span<const double>(c));
    }

    /// Accepts masses that are already normalized (to within 1e-9).
    static NormalizedHistogram from_masses(std::vector<double> masses) {
        check_bins(masses.size());
        const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
        for (double m : masses)
            if (m < 0.0) throw Error(ErrorCode::invalid_argument, "negative histogram mass");
        NormalizedHistogram h;
        h.mass_ = std::move(masses);
        if (total == 0.0) {
            h.empty_ = true;
        } else if (std::abs(total - 1.0) > 1e-9) {
            throw Error(ErrorCode::invalid_argument, "histogram masses do not sum to 1");
        }
        return h;
    }

    std::size_t bins() const noexcept { return mass_.size(); }
    bool empty() const noexcept { return empty_; }
    double operator[](std::size_t i) const { return mass_[i]; }
    std::span<const double> masses() const noexcept { return mass_; }

    friend bool operator==(const NormalizedHistogram&, const NormalizedHistogram&) = default;

private:
    static void check_bins(std::size_t bins) {
        // Any nonzero bin count is accepted so two-bin toy distributions work;
        // image histograms use powers of two between 4 and 256.
        if (bins == 0) throw Error(ErrorCode::invalid_argument, "histogram needs at least one bin");
    }

    std::vector<double> mass_;
    bool empty_ = false;
};

} // namespace mitotype
