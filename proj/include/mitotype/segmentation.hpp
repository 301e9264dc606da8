#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "mitotype/error.hpp"
#include "mitotype/image.hpp"
#include "mitotype/imaging.hpp"

namespace mitotype {

struct Nucleus {
    std::size_t x = 0;
    std::size_t y = 0;
    double radius = 0.0; ///< distance-transform value at the center

    friend bool operator==(const Nucleus&, const Nucleus&) = default;
};

using NucleusSet = std::vector<Nucleus>;

struct NucleusDetectionConfig {
    double smooth_sigma = 2.0;
    std::size_t min_area = 20;    ///< components below this size are discarded
    double min_separation = 8.0;  ///< px between accepted centers
    /// Pixels brighter than this are treated as background and left out of
    /// the Otsu histogram.
    int max_threshold = 200;
};

/// Otsu threshold of a 256-bin histogram: the t maximizing between-class
/// variance for the split {<= t} vs {> t}. When empty bins make a run of
/// thresholds equally good, the middle of the run is returned. Returns -1
/// when no split separates anything (constant image).
inline int otsu_threshold(const std::array<std::uint64_t, 256>& counts) {
    double total = 0.0, weighted = 0.0;
    for (int v = 0; v < 256; ++v) {
        total += static_cast<double>(counts[v]);
        weighted += static_cast<double>(v) * static_cast<double>(counts[v]);
    }
    if (total == 0.0) return -1;
    double w0 = 0.0, sum0 = 0.0, best = 0.0;
    int best_t = -1, last_t = -1;
    for (int t = 0; t < 255; ++t) {
        w0 += static_cast<double>(counts[t]);
        sum0 += static_cast<double>(t) * static_cast<double>(counts[t]);
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double mu0 = sum0 / w0, mu1 = (weighted - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best) {
            best = between;
            best_t = last_t = t;
        } else if (between == best && best_t >= 0) {
            last_t = t;
        }
    }
    return best_t < 0 ? -1 : (best_t + last_t) / 2;
}

/// 8-connected component labels (0 = background, 1.. in row-major order of
/// first pixel) and per-label areas (index 0 unused).
struct Components {
    Plane<std::uint32_t> labels;
    std::vector<std::size_t> areas;
};

inline Components label_components(const BitMask& mask) {
    const std::size_t w = mask.width(), h = mask.height();
    Components c{Plane<std::uint32_t>(w, h, 0), {0}};
    std::deque<std::size_t> queue;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || c.labels[start]) continue;
        const auto label = static_cast<std::uint32_t>(c.areas.size());
        std::size_t area = 0;
        c.labels[start] = label;
        queue.push_back(start);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            ++area;
            const std::size_t px = p % w, py = p / w;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const auto nx = static_cast<std::ptrdiff_t>(px) + dx, ny = static_cast<std::ptrdiff_t>(py) + dy;
                    if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(w) || ny >= static_cast<std::ptrdiff_t>(h))
                        continue;
                    const std::size_t q = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                    if (mask[q] && !c.labels[q]) {
                        c.labels[q] = label;
                        queue.push_back(q);
                    }
                }
            }
        }
        c.areas.push_back(area);
    }
    return c;
}

namespace detail {

// Felzenszwalb-Huttenlocher 1-D squared distance transform of f. Unset
// entries carry a large finite value; every line contains a zero (padding).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<std::size_t>& v,
                   std::vector<double>& z) {
    const std::size_t n = f.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::size_t k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (std::size_t q = 1; q < n; ++q) {
        const double qd = static_cast<double>(q);
        double s = 0.0;
        for (;;) {
            const double vd = static_cast<double>(v[k]);
            s = ((f[q] + qd * qd) - (f[v[k]] + vd * vd)) / (2.0 * qd - 2.0 * vd);
            if (s <= z[k] && k > 0) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        while (z[k + 1] < static_cast<double>(q)) ++k;
        const double diff = static_cast<double>(q) - static_cast<double>(v[k]);
        d[q] = diff * diff + f[v[k]];
    }
}

} // namespace detail

/// Exact Euclidean distance from every set pixel to the nearest unset pixel;
/// pixels outside the image count as unset. Unset pixels get 0.
inline Plane<double> distance_transform(const BitMask& mask) {
    constexpr double unset = 1e20;
    const std::size_t w = mask.width() + 2, h = mask.height() + 2;
    std::vector<double> grid(w * h, 0.0);
    for (std::size_t y = 0; y < mask.height(); ++y)
        for (std::size_t x = 0; x < mask.width(); ++x)
            if (mask.test(x, y)) grid[(y + 1) * w + x + 1] = unset;

    const std::size_t n = std::max(w, h);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<std::size_t> v(n);
    for (std::size_t x = 0; x < w; ++x) {
        f.resize(h), d.resize(h);
        for (std::size_t y = 0; y < h; ++y) f[y] = grid[y * w + x];
        detail::edt_1d(f, d, v, z);
        for (std::size_t y = 0; y < h; ++y) grid[y * w + x] = d[y];
    }
    for (std::size_t y = 0; y < h; ++y) {
        f.resize(w), d.resize(w);
        for (std::size_t x = 0; x < w; ++x) f[x] = grid[y * w + x];
        detail::edt_1d(f, d, v, z);
        for (std::size_t x = 0; x < w; ++x) grid[y * w + x] = d[x];
    }

    Plane<double> out(mask.width(), mask.height(), 0.0);
    for (std::size_t y = 0; y < mask.height(); ++y)
        for (std::size_t x = 0; x < mask.width(); ++x) out.at(x, y) = std::sqrt(grid[(y + 1) * w + x + 1]);
    return out;
}

/// Square sliding-window maximum with half-width `radius`, clipped at borders.
inline Plane<double> max_filter(const Plane<double>& in, std::size_t radius) {
    const std::size_t w = in.width(), h = in.height();
    Plane<double> tmp(w, h), out(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t lo = x >= radius ? x - radius : 0, hi = std::min(w - 1, x + radius);
            double m = in.at(lo, y);
            for (std::size_t i = lo + 1; i <= hi; ++i) m = std::max(m, in.at(i, y));
            tmp.at(x, y) = m;
        }
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t lo = y >= radius ? y - radius : 0, hi = std::min(h - 1, y + radius);
        for (std::size_t x = 0; x < w; ++x) {
            double m = tmp.at(x, lo);
            for (std::size_t i = lo + 1; i <= hi; ++i) m = std::max(m, tmp.at(x, i));
            out.at(x, y) = m;
        }
    }
    return out;
}

/// Binary mask of nucleus pixels: smoothed channel at or below the Otsu
/// threshold of its pixels darker than max_threshold, with small components
/// removed.
inline BitMask nucleus_mask(const GrayImage& nucleus_channel, const NucleusDetectionConfig& cfg = {}) {
    const GrayImage smooth = gaussian_blur(nucleus_channel, cfg.smooth_sigma);
    auto counts = region_counts(smooth, 0, 0, smooth.width(), smooth.height());
    // Near-white pixels are background, not counterstain; they stay out of
    // the Otsu histogram so the split falls between nuclei and tissue.
    for (int v = std::max(cfg.max_threshold + 1, 0); v < 256; ++v) counts[v] = 0;
    const int otsu = otsu_threshold(counts);
    BitMask mask(smooth.width(), smooth.height());
    if (otsu < 0) return mask;
    mask = threshold_mask(smooth, otsu, Keep::below);

    const Components comps = label_components(mask);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] && comps.areas[comps.labels[i]] < cfg.min_area) mask[i] = 0;
    return mask;
}

/// Maxima of the distance transform become nucleus centers. A pixel is a
/// candidate when it is positive and equals the maximum over the square
/// window of half-width ceil(min_separation). Candidates are visited in
/// row-major order; one closer than min_separation to an accepted center is
/// dropped.
inline NucleusSet centers_from_distance(const Plane<double>& dist, double min_separation) {
    const auto radius = static_cast<std::size_t>(std::ceil(std::max(0.0, min_separation)));
    const Plane<double> peak = max_filter(dist, radius);
    NucleusSet out;
    const double sep2 = min_separation * min_separation;
    for (std::size_t y = 0; y < dist.height(); ++y) {
        for (std::size_t x = 0; x < dist.width(); ++x) {
            const double v = dist.at(x, y);
            if (!(v > 0.0) || v != peak.at(x, y)) continue;
            bool conflict = false;
            for (const auto& n : out) {
                const double dx = static_cast<double>(x) - static_cast<double>(n.x);
                const double dy = static_cast<double>(y) - static_cast<double>(n.y);
                if (dx * dx + dy * dy < sep2) {
                    conflict = true;
                    break;
                }
            }
            if (!conflict) out.push_back({x, y, v});
        }
    }
    return out;
}

/// Nucleus detection on a deconvolved nucleus channel (dark = stained).
inline NucleusSet detect_nuclei(const GrayImage& nucleus_channel, const NucleusDetectionConfig& cfg = {}) {
    const BitMask mask = nucleus_mask(nucleus_channel, cfg);
    if (mask.count() == 0) return {};
    return centers_from_distance(distance_transform(mask), cfg.min_separation);
}

// ---------------------------------------------------------------------------
// Cytoplasm rings

struct RingConfig {
    double thickness = 10.0;
    int bg_threshold = 220;
    /// When false every ring starts at fallback_radius instead of the
    /// detected radius.
    bool use_radius_estimate = true;
    double fallback_radius = 8.0;
};

struct RoiMask {
    BitMask mask;
    std::size_t pixel_count = 0;
};

inline double inner_radius(const Nucleus& n, const RingConfig& cfg) {
    return cfg.use_radius_estimate ? n.radius : cfg.fallback_radius;
}

namespace detail {

template <class Fn>
void for_each_in_disk(std::size_t w, std::size_t h, const Nucleus& n, double r, Fn&& fn) {
    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(r));
    const auto cx = static_cast<std::ptrdiff_t>(n.x), cy = static_cast<std::ptrdiff_t>(n.y);
    const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, cy - reach);
    const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(h) - 1, cy + reach);
    const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, cx - reach);
    const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(w) - 1, cx + reach);
    for (std::ptrdiff_t y = y0; y <= y1; ++y)
        for (std::ptrdiff_t x = x0; x <= x1; ++x) {
            const auto dx = static_cast<double>(x - cx), dy = static_cast<double>(y - cy);
            fn(static_cast<std::size_t>(x), static_cast<std::size_t>(y), dx * dx + dy * dy);
        }
}

} // namespace detail

/// Union of annuli r_in < d <= r_in + thickness around each nucleus, minus
/// every nucleus's inner disk, minus pixels brighter than bg_threshold.
inline RoiMask build_cytoplasm_rings(const NucleusSet& nuclei, const GrayImage& spot_gray, const RingConfig& cfg = {}) {
    if (nuclei.empty()) throw Error(ErrorCode::empty_roi, "no nuclei");
    const std::size_t w = spot_gray.width(), h = spot_gray.height();
    BitMask ring(w, h), inner(w, h);
    for (const auto& n : nuclei) {
        if (n.x >= w || n.y >= h) throw Error(ErrorCode::invalid_argument, "nucleus outside image");
        const double r_in = inner_radius(n, cfg);
        const double r_out = r_in + cfg.thickness;
        const double in2 = r_in * r_in, out2 = r_out * r_out;
        detail::for_each_in_disk(w, h, n, r_out, [&](std::size_t x, std::size_t y, double d2) {
            if (d2 <= in2)
                inner.set(x, y);
            else if (d2 <= out2)
                ring.set(x, y);
        });
    }
    RoiMask roi{BitMask(w, h), 0};
    for (std::size_t i = 0; i < ring.size(); ++i) {
        if (ring[i] && !inner[i] && spot_gray[i] <= cfg.bg_threshold) {
            roi.mask[i] = 1;
            ++roi.pixel_count;
        }
    }
    return roi;
}

/// Debug rendering: ROI purple, nuclear disks blue, ring pixels dropped as
/// background green.
inline RasterImage roi_overlay(const RasterImage& spot, const NucleusSet& nuclei, const RoiMask& roi,
                               const RingConfig& cfg = {}) {
    RasterImage out = spot;
    const std::size_t w = spot.width(), h = spot.height();
    const GrayImage gray = to_grayscale(spot);
    for (const auto& n : nuclei) {
        const double r_in = inner_radius(n, cfg), r_out = r_in + cfg.thickness;
        detail::for_each_in_disk(w, h, n, r_out, [&](std::size_t x, std::size_t y, double d2) {
            if (d2 <= r_in * r_in)
                out.set(x, y, 40, 60, 200);
            else if (gray.at(x, y) > cfg.bg_threshold)
                out.set(x, y, 40, 200, 60);
        });
    }
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            if (roi.mask.test(x, y)) out.set(x, y, 160, 40, 160);
    return out;
}

} // namespace mitotype
