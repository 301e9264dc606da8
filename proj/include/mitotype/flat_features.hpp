#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mitotype/error.hpp"
#include "mitotype/image.hpp"
#include "mitotype/segmentation.hpp"

namespace mitotype {

/// Mitochondria-channel intensities at the ROI pixels of one spot.
struct RoiIntensitySample {
    std::vector<std::uint8_t> values;
    std::string spot_id;
};

inline RoiIntensitySample collect_roi_sample(const GrayImage& channel, const RoiMask& roi, std::string spot_id = {}) {
    if (!same_shape(channel, roi.mask)) throw Error(ErrorCode::invalid_argument, "ROI and channel differ in size");
    RoiIntensitySample s{{}, std::move(spot_id)};
    s.values.reserve(roi.pixel_count);
    for (std::size_t i = 0; i < channel.size(); ++i)
        if (roi.mask[i]) s.values.push_back(channel[i]);
    return s;
}

/// Bin counts of the pyramid levels, finest first.
inline constexpr std::array<std::size_t, 7> pyramid_bins{256, 128, 64, 32, 16, 8, 4};
inline constexpr std::size_t pyramid_length = 508;
inline constexpr std::size_t scalar_count = 9;
inline constexpr std::size_t hist_feature_length = pyramid_length + scalar_count;

/// Offset of pyramid level `level` inside a HIST feature vector.
constexpr std::size_t pyramid_offset(std::size_t level) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < level; ++i) off += pyramid_bins[i];
    return off;
}

static_assert(pyramid_offset(7) == pyramid_length);

namespace detail {

inline std::array<std::uint64_t, 256> counts_of(const RoiIntensitySample& s) {
    if (s.values.empty()) throw Error(ErrorCode::empty_roi, s.spot_id);
    std::array<std::uint64_t, 256> c{};
    for (auto v : s.values) ++c[v];
    return c;
}

} // namespace detail

/// Normalized histograms with 256..4 bins. Coarser levels merge adjacent
/// bin pairs of the finer one.
inline std::vector<NormalizedHistogram> histogram_pyramid(const RoiIntensitySample& s) {
    const auto counts = detail::counts_of(s);
    const double n = static_cast<double>(s.values.size());
    std::vector<double> level(256);
    for (std::size_t i = 0; i < 256; ++i) level[i] = static_cast<double>(counts[i]) / n;

    std::vector<NormalizedHistogram> out;
    out.reserve(pyramid_bins.size());
    out.push_back(NormalizedHistogram::from_masses(level));
    for (std::size_t k = 1; k < pyramid_bins.size(); ++k) {
        std::vector<double> coarse(level.size() / 2);
        for (std::size_t j = 0; j < coarse.size(); ++j) coarse[j] = level[2 * j] + level[2 * j + 1];
        out.push_back(NormalizedHistogram::from_masses(coarse));
        level = std::move(coarse);
    }
    return out;
}

struct QuartileStats {
    double q1 = 0, q2 = 0, q3 = 0, q4 = 0;
    double mean = 0, median = 0;
    double skewness = 0, kurtosis = 0;
};

/// q_k is the smallest intensity whose cumulative count reaches k/4 of the
/// sample. Moments are population moments; kurtosis is non-excess. A sample
/// with zero variance reports skewness = kurtosis = 0.
inline QuartileStats quartile_stats(const RoiIntensitySample& s) {
    const auto counts = detail::counts_of(s);
    const std::uint64_t n = s.values.size();
    QuartileStats st;

    std::array<double*, 4> qs{&st.q1, &st.q2, &st.q3, &st.q4};
    std::uint64_t cum = 0;
    std::size_t k = 1;
    for (int v = 0; v < 256 && k <= 4; ++v) {
        cum += counts[v];
        while (k <= 4 && 4 * cum >= k * n) {
            *qs[k - 1] = v;
            ++k;
        }
    }

    // Median: middle order statistic, or the mean of the two middle ones.
    auto order_stat = [&](std::uint64_t rank) {
        std::uint64_t c = 0;
        for (int v = 0; v < 256; ++v) {
            c += counts[v];
            if (c > rank) return static_cast<double>(v);
        }
        return 255.0;
    };
    st.median = n % 2 ? order_stat(n / 2) : 0.5 * (order_stat(n / 2 - 1) + order_stat(n / 2));

    double sum = 0.0;
    for (int v = 0; v < 256; ++v) sum += static_cast<double>(v) * static_cast<double>(counts[v]);
    st.mean = sum / static_cast<double>(n);

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (int v = 0; v < 256; ++v) {
        if (!counts[v]) continue;
        const double d = v - st.mean, c = static_cast<double>(counts[v]);
        m2 += c * d * d;
        m3 += c * d * d * d;
        m4 += c * d * d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);
    if (m2 > 0.0) {
        st.skewness = m3 / std::pow(m2, 1.5);
        st.kurtosis = m4 / (m2 * m2);
    }
    return st;
}

/// Mass fractions of the four intensity bands, strongest stain first:
/// index 3 = [0,63] (darkest), index 0 = [192,255] (brightest).
inline std::array<double, 4> intensity_band_fractions(const RoiIntensitySample& s) {
    const auto counts = detail::counts_of(s);
    std::array<std::uint64_t, 4> band{};
    for (int v = 0; v < 256; ++v) band[3 - v / 64] += counts[v];
    const double n = static_cast<double>(s.values.size());
    return {band[0] / n, band[1] / n, band[2] / n, band[3] / n};
}

/// 100 * sum_i i * f_i over bands i = 1 (brightest) .. 4 (darkest).
inline double h_score(const RoiIntensitySample& s) {
    const auto f = intensity_band_fractions(s);
    return 100.0 * (1.0 * f[0] + 2.0 * f[1] + 3.0 * f[2] + 4.0 * f[3]);
}

using FlatFeatureVector = std::vector<double>;

/// Layout: pyramid levels 256,128,64,32,16,8,4 (508 values), then
/// q1, q2, q3, q4, mean, median, skewness, kurtosis, HScore.
inline FlatFeatureVector assemble_hist_features(const RoiIntensitySample& s) {
    FlatFeatureVector v;
    v.reserve(hist_feature_length);
    for (const auto& level : histogram_pyramid(s)) v.insert(v.end(), level.masses().begin(), level.masses().end());
    const auto st = quartile_stats(s);
    v.insert(v.end(), {st.q1, st.q2, st.q3, st.q4, st.mean, st.median, st.skewness, st.kurtosis, h_score(s)});
    return v;
}

/// Names of the 517 HIST columns, for reports.
inline std::vector<std::string> hist_feature_names() {
    std::vector<std::string> names;
    names.reserve(hist_feature_length);
    for (auto bins : pyramid_bins)
        for (std::size_t j = 0; j < bins; ++j) names.push_back("h" + std::to_string(bins) + "_" + std::to_string(j));
    for (const char* n : {"q1", "q2", "q3", "q4", "mean", "median", "skewness", "kurtosis", "hscore"}) names.emplace_back(n);
    return names;
}

/// Mean gray value over the foreground mask.
inline double mean_intensity_baseline(const GrayImage& spot_gray, const BitMask& fg) {
    if (!same_shape(spot_gray, fg)) throw Error(ErrorCode::invalid_argument, "mask and image differ in size");
    std::uint64_t sum = 0, n = 0;
    for (std::size_t i = 0; i < spot_gray.size(); ++i)
        if (fg[i]) {
            sum += spot_gray[i];
            ++n;
        }
    if (n == 0) throw Error(ErrorCode::empty_roi, "empty foreground");
    return static_cast<double>(sum) / static_cast<double>(n);
}

} // namespace mitotype
