#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mitotype/error.hpp"
#include "mitotype/image.hpp"

namespace mitotype {

enum class LogBase { natural, two };

inline double log_in(double x, LogBase base) {
    return base == LogBase::natural ? std::log(x) : std::log2(x);
}

inline std::uint8_t clamp_round_u8(double v) {
    if (!(v > 0.0)) return 0; // also maps NaN to 0
    if (v >= 255.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v));
}

// ---------------------------------------------------------------------------
// Grayscale and histograms

inline std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return clamp_round_u8(0.299 * r + 0.587 * g + 0.114 * b);
}

inline GrayImage to_grayscale(const RasterImage& img) {
    GrayImage out(img.width(), img.height());
    const auto s = img.samples();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = luminance(s[3 * i], s[3 * i + 1], s[3 * i + 2]);
    return out;
}

/// Raw 256-bin intensity counts over a rectangular region.
inline std::array<std::uint64_t, 256> region_counts(const GrayImage& img, std::size_t x0, std::size_t y0,
                                                    std::size_t w, std::size_t h) {
    std::array<std::uint64_t, 256> counts{};
    for (std::size_t y = y0; y < y0 + h; ++y) {
        const std::uint8_t* row = &img.at(x0, y);
        for (std::size_t x = 0; x < w; ++x) ++counts[row[x]];
    }
    return counts;
}

inline NormalizedHistogram gray_histogram(const GrayImage& img) {
    const auto counts = region_counts(img, 0, 0, img.width(), img.height());
    return NormalizedHistogram::from_counts(std::span<const std::uint64_t>(counts));
}

/// Shannon entropy -sum m ln m (or log2), with 0 ln 0 = 0.
inline double shannon_entropy(const NormalizedHistogram& h, LogBase base = LogBase::natural) {
    if (h.empty() || h.bins() == 0) throw Error(ErrorCode::empty_histogram);
    double e = 0.0;
    for (double m : h.masses())
        if (m > 0.0) e -= m * std::log(m);
    if (base == LogBase::two) e /= std::numbers::ln2;
    return std::max(0.0, e);
}

/// Entropy straight from integer counts; avoids building a histogram object
/// in the sliding-window loops.
inline double entropy_of_counts(std::span<const std::uint64_t> counts, LogBase base = LogBase::natural) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw Error(ErrorCode::empty_histogram);
    const double n = static_cast<double>(total);
    double e = 0.0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double m = static_cast<double>(c) / n;
        e -= m * std::log(m);
    }
    if (base == LogBase::two) e /= std::numbers::ln2;
    return std::max(0.0, e);
}

// ---------------------------------------------------------------------------
// White balancing

struct WhiteBalanceConfig {
    std::size_t window = 100;
    std::size_t stride = 0; ///< 0 means window / 2
    LogBase log_base = LogBase::natural;
};

struct BackgroundEstimate {
    std::size_t x = 0, y = 0;  ///< top-left of the selected window
    double entropy = 0.0;
    std::array<double, 3> color{}; ///< per-channel mean of the window
};

/// Slides a square window over the image and returns the window whose
/// grayscale histogram has the lowest entropy. Ties keep the first window in
/// row-major scan order.
inline BackgroundEstimate estimate_background(const RasterImage& img, const WhiteBalanceConfig& cfg = {}) {
    const std::size_t win = cfg.window;
    if (win == 0 || win > std::min(img.width(), img.height()))
        throw Error(ErrorCode::invalid_argument, "white-balance window must fit inside the image");
    const std::size_t stride = cfg.stride == 0 ? std::max<std::size_t>(1, win / 2) : cfg.stride;
    const GrayImage gray = to_grayscale(img);

    BackgroundEstimate best;
    best.entropy = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y + win <= img.height(); y += stride) {
        for (std::size_t x = 0; x + win <= img.width(); x += stride) {
            const auto counts = region_counts(gray, x, y, win, win);
            const double e = entropy_of_counts(counts, cfg.log_base);
            if (e < best.entropy) {
                best.entropy = e;
                best.x = x;
                best.y = y;
            }
        }
    }

    std::array<std::uint64_t, 3> sums{};
    for (std::size_t y = best.y; y < best.y + win; ++y)
        for (std::size_t x = best.x; x < best.x + win; ++x)
            for (std::size_t c = 0; c < 3; ++c) sums[c] += img.at(x, y, c);
    const double n = static_cast<double>(win * win);
    for (std::size_t c = 0; c < 3; ++c) best.color[c] = static_cast<double>(sums[c]) / n;
    return best;
}

/// Divides every pixel by the background color and rescales to 255.
inline RasterImage apply_white_balance(const RasterImage& img, const std::array<double, 3>& background) {
    for (double c : background)
        if (!(c > 0.0)) throw Error(ErrorCode::black_background);
    std::array<std::array<std::uint8_t, 256>, 3> lut{};
    for (std::size_t c = 0; c < 3; ++c)
        for (int v = 0; v < 256; ++v) lut[c][v] = clamp_round_u8(v / background[c] * 255.0);

    RasterImage out = img;
    auto s = out.samples();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = lut[i % 3][s[i]];
    return out;
}

inline RasterImage white_balance(const RasterImage& img, const WhiteBalanceConfig& cfg = {}) {
    return apply_white_balance(img, estimate_background(img, cfg).color);
}

// ---------------------------------------------------------------------------
// Color deconvolution

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

namespace detail {

inline double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double determinant(const Mat3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline Mat3 inverse(const Mat3& m, double det) {
    Mat3 r{};
    r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return r;
}

inline double frobenius(const Mat3& m) {
    double s = 0.0;
    for (const auto& row : m)
        for (double v : row) s += v * v;
    return std::sqrt(s);
}

} // namespace detail

/// Three unit optical-density vectors, one per stain. Stain 0 is the
/// nuclear counterstain, stain 1 the mitochondrial chromogen, stain 2 the
/// residual channel.
class StainBasis {
public:
    /// Normalizes the given vectors. When `third` is omitted it becomes the
    /// normalized cross product of the first two.
    static StainBasis from_vectors(const Vec3& first, const Vec3& second, std::optional<Vec3> third = std::nullopt) {
        Mat3 m{first, second, third ? *third : detail::cross(first, second)};
        for (auto& v : m) {
            const double n = detail::norm(v);
            if (!(n > 1e-12) || !std::isfinite(n)) throw Error(ErrorCode::degenerate_stain_basis, "zero stain vector");
            for (double& c : v) c /= n;
        }
        return StainBasis(m);
    }

    /// Hematoxylin and DAB optical densities as published for the classic
    /// Ruifrok-Johnston deconvolution; third vector completes the basis.
    static StainBasis hematoxylin_dab() {
        return from_vectors({0.650, 0.704, 0.286}, {0.268, 0.570, 0.776});
    }

    const Vec3& vector(std::size_t stain) const { return rows_[stain]; }
    const Mat3& rows() const noexcept { return rows_; }
    /// Maps an optical-density triple to stain amounts.
    const Mat3& unmixing() const noexcept { return unmix_; }
    double condition_number() const noexcept { return condition_; }

private:
    explicit StainBasis(const Mat3& rows) : rows_(rows) {
        // OD = rows^T * amounts, so amounts = (rows^T)^-1 * OD.
        Mat3 mixing{};
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) mixing[i][j] = rows_[j][i];
        const double det = detail::determinant(mixing);
        if (!std::isfinite(det) || std::abs(det) < 1e-10) throw Error(ErrorCode::degenerate_stain_basis);
        unmix_ = detail::inverse(mixing, det);
        condition_ = detail::frobenius(mixing) * detail::frobenius(unmix_);
        if (!std::isfinite(condition_) || condition_ > 1e10) throw Error(ErrorCode::degenerate_stain_basis);
    }

    Mat3 rows_{};
    Mat3 unmix_{};
    double condition_ = 0.0;
};

/// Transmitted intensities (0..255, real-valued) for the given stain amounts.
inline Vec3 synthesize_intensity(const StainBasis& basis, const Vec3& amounts) {
    Vec3 out{};
    for (std::size_t c = 0; c < 3; ++c) {
        double od = 0.0;
        for (std::size_t s = 0; s < 3; ++s) od += basis.vector(s)[c] * amounts[s];
        out[c] = 255.0 * std::pow(10.0, -od);
    }
    return out;
}

inline double optical_density(double intensity) { return -std::log10(std::max(intensity, 1.0) / 255.0); }

/// Stain amounts for a real-valued RGB intensity triple; negatives clamp to 0.
inline Vec3 stain_amounts(const StainBasis& basis, const Vec3& intensity) {
    const Vec3 od{optical_density(intensity[0]), optical_density(intensity[1]), optical_density(intensity[2])};
    const Mat3& u = basis.unmixing();
    Vec3 a{};
    for (std::size_t s = 0; s < 3; ++s) a[s] = std::max(0.0, u[s][0] * od[0] + u[s][1] * od[1] + u[s][2] * od[2]);
    return a;
}

inline std::uint8_t render_stain(double amount) { return clamp_round_u8(255.0 * std::pow(10.0, -amount)); }

/// Splits an RGB image into one 8-bit intensity image per stain (dark means
/// strong stain).
inline std::array<GrayImage, 3> color_deconvolve(const RasterImage& img, const StainBasis& basis) {
    std::array<double, 256> od_lut{};
    for (int v = 0; v < 256; ++v) od_lut[v] = optical_density(v);
    const Mat3& u = basis.unmixing();

    std::array<GrayImage, 3> out{GrayImage(img.width(), img.height()), GrayImage(img.width(), img.height()),
                                 GrayImage(img.width(), img.height())};
    const auto s = img.samples();
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const double r = od_lut[s[3 * i]], g = od_lut[s[3 * i + 1]], b = od_lut[s[3 * i + 2]];
        for (std::size_t k = 0; k < 3; ++k) {
            const double a = std::max(0.0, u[k][0] * r + u[k][1] * g + u[k][2] * b);
            out[k][i] = render_stain(a);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Filtering and masks

/// Normalized 1-D Gaussian with radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "sigma must be positive");
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        const double w = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        total += w;
    }
    for (double& w : k) w /= total;
    return k;
}

/// Separable Gaussian blur with replicated borders; rounds once at the end.
inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    const auto k = gaussian_kernel(sigma);
    const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
    const auto w = static_cast<std::ptrdiff_t>(img.width());
    const auto h = static_cast<std::ptrdiff_t>(img.height());
    auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t hi) { return std::clamp<std::ptrdiff_t>(v, 0, hi - 1); };

    std::vector<double> tmp(img.size());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] * img.at(clampi(x + i, w), y);
            tmp[y * w + x] = acc;
        }
    }
    GrayImage out(img.width(), img.height());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] * tmp[clampi(y + i, h) * w + x];
            out.at(x, y) = clamp_round_u8(acc);
        }
    }
    return out;
}

enum class Keep { below, above };

/// keep=below marks pixels <= t, keep=above marks pixels > t.
inline BitMask threshold_mask(const GrayImage& img, int t, Keep keep) {
    if (t < 0 || t > 255) throw Error(ErrorCode::invalid_argument, "threshold outside [0,255]");
    BitMask m(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const bool below = img[i] <= t;
        m[i] = (keep == Keep::below ? below : !below) ? 1 : 0;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Dihedral augmentation

struct AugmentedVariant {
    std::string tag;
    RasterImage image;
};

/// Rotates a square image 90 degrees clockwise.
inline RasterImage rotate90(const RasterImage& img) {
    const std::size_t n = img.width();
    RasterImage out(n, n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(y, n - 1 - x, c);
    return out;
}

/// Mirrors left-right.
inline RasterImage flip_horizontal(const RasterImage& img) {
    RasterImage out(img.width(), img.height());
    for (std::size_t y = 0; y < img.height(); ++y)
        for (std::size_t x = 0; x < img.width(); ++x)
            for (std::size_t c = 0; c < 3; ++c) out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
    return out;
}

/// Tags of the eight dihedral variants in output order.
inline const std::array<std::string, 8>& augment_tags() {
    static const std::array<std::string, 8> tags{"orig", "rot90",      "rot180",      "rot270",
                                                 "flip", "flip_rot90", "flip_rot180", "flip_rot270"};
    return tags;
}

/// The four clockwise rotations of the image, then the four rotations of its
/// left-right mirror. Identity comes first.
inline std::vector<AugmentedVariant> augment_variants(const RasterImage& img) {
    if (img.width() != img.height()) throw Error(ErrorCode::non_square);
    std::vector<AugmentedVariant> out;
    out.reserve(8);
    const auto& tags = augment_tags();
    RasterImage cur = img;
    for (std::size_t i = 0; i < 4; ++i) {
        out.push_back({tags[i], cur});
        cur = rotate90(cur);
    }
    cur = flip_horizontal(img);
    for (std::size_t i = 0; i < 4; ++i) {
        out.push_back({tags[4 + i], cur});
        cur = rotate90(cur);
    }
    return out;
}

} // namespace mitotype
