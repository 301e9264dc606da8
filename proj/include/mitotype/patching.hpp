#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mitotype/error.hpp"
#include "mitotype/image.hpp"
#include "mitotype/imaging.hpp"
#include "mitotype/random.hpp"

namespace mitotype {

struct Patch {
    std::size_t x = 0; ///< top-left column
    std::size_t y = 0; ///< top-left row
    std::size_t side = 227;
    std::string spot_id;
    std::size_t patch_id = 0; ///< acceptance index within the spot

    friend bool operator==(const Patch&, const Patch&) = default;
};

struct SamplerConfig {
    std::size_t side = 227;
    std::size_t candidates = 1000;
    int fg_threshold = 230;
    double blur_sigma = 2.0;
    double min_fg_fraction = 0.80;
    double max_overlap_fraction = 0.50;
    double min_entropy = 4.6;
    LogBase log_base = LogBase::natural;
    std::uint64_t seed = 0;
};

/// Summed-area table over a byte plane; sum of any rectangle in O(1).
class IntegralImage {
public:
    IntegralImage() = default;
    explicit IntegralImage(const Plane<std::uint8_t>& m) : w_(m.width() + 1), sums_((m.width() + 1) * (m.height() + 1), 0) {
        for (std::size_t y = 0; y < m.height(); ++y) {
            std::uint64_t row = 0;
            for (std::size_t x = 0; x < m.width(); ++x) {
                row += m.at(x, y) != 0;
                sums_[(y + 1) * w_ + x + 1] = sums_[y * w_ + x + 1] + row;
            }
        }
    }

    /// Number of set pixels in [x, x+w) x [y, y+h).
    std::uint64_t count(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const {
        return sums_[(y + h) * w_ + x + w] - sums_[y * w_ + x + w] - sums_[(y + h) * w_ + x] + sums_[y * w_ + x];
    }

private:
    std::size_t w_ = 0;
    std::vector<std::uint64_t> sums_;
};

/// Tissue mask: gray -> Gaussian blur -> pixels <= fg_threshold.
inline BitMask foreground_mask(const RasterImage& img, const SamplerConfig& cfg = {}) {
    return threshold_mask(gaussian_blur(to_grayscale(img), cfg.blur_sigma), cfg.fg_threshold, Keep::below);
}

inline double patch_entropy(const GrayImage& gray, std::size_t x, std::size_t y, std::size_t side, LogBase base) {
    const auto counts = region_counts(gray, x, y, side, side);
    return entropy_of_counts(counts, base);
}

/// Random patch sampling. Candidate origins are drawn uniformly over all
/// positions where the patch fits. Candidates are then visited in draw order
/// and accepted when the foreground covers at least min_fg_fraction of the
/// patch, the overlap with the union of already accepted patches is at most
/// max_overlap_fraction of the patch, and the raw grayscale patch entropy is
/// at least min_entropy.
inline std::vector<Patch> sample_patches(const RasterImage& img, const SamplerConfig& cfg = {},
                                         const std::string& spot_id = {}) {
    const std::size_t side = cfg.side;
    if (side == 0 || img.width() < side || img.height() < side) throw Error(ErrorCode::image_too_small, spot_id);
    if (cfg.min_fg_fraction < 0 || cfg.min_fg_fraction > 1 || cfg.max_overlap_fraction < 0 || cfg.max_overlap_fraction > 1)
        throw Error(ErrorCode::invalid_argument, "fractions must lie in [0,1]");

    const std::size_t nx = img.width() - side + 1, ny = img.height() - side + 1;
    Rng rng(cfg.seed);
    std::vector<std::pair<std::size_t, std::size_t>> origins(cfg.candidates);
    for (auto& o : origins) {
        o.first = static_cast<std::size_t>(rng.below(nx));
        o.second = static_cast<std::size_t>(rng.below(ny));
    }

    const GrayImage gray = to_grayscale(img);
    const IntegralImage fg(foreground_mask(img, cfg));
    BitMask covered(img.width(), img.height());
    IntegralImage covered_sums(covered);
    const double area = static_cast<double>(side * side);

    std::vector<Patch> accepted;
    for (const auto& [x, y] : origins) {
        if (static_cast<double>(fg.count(x, y, side, side)) < cfg.min_fg_fraction * area) continue;
        if (static_cast<double>(covered_sums.count(x, y, side, side)) > cfg.max_overlap_fraction * area) continue;
        if (patch_entropy(gray, x, y, side, cfg.log_base) < cfg.min_entropy) continue;

        accepted.push_back({x, y, side, spot_id, accepted.size()});
        for (std::size_t yy = y; yy < y + side; ++yy)
            for (std::size_t xx = x; xx < x + side; ++xx) covered.set(xx, yy);
        covered_sums = IntegralImage(covered);
    }
    return accepted;
}

inline RasterImage crop(const RasterImage& img, std::size_t x, std::size_t y, std::size_t w, std::size_t h) {
    if (x + w > img.width() || y + h > img.height()) throw Error(ErrorCode::invalid_argument, "crop outside image");
    RasterImage out(w, h);
    for (std::size_t yy = 0; yy < h; ++yy)
        for (std::size_t xx = 0; xx < w; ++xx)
            for (std::size_t c = 0; c < 3; ++c) out.at(xx, yy, c) = img.at(x + xx, y + yy, c);
    return out;
}

inline RasterImage crop(const RasterImage& img, const Patch& p) { return crop(img, p.x, p.y, p.side, p.side); }

} // namespace mitotype
