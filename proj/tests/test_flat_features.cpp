#include <algorithm>
#include <cmath>

#include "mitotype/flat_features.hpp"
#include "test_util.hpp"

using namespace mitotype;

namespace {

RoiIntensitySample sample_of(std::vector<std::uint8_t> v) { return {std::move(v), "s"}; }

RoiIntensitySample random_sample(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::uint8_t> v(n);
    for (auto& x : v) x = static_cast<std::uint8_t>(rng.below(256));
    return sample_of(std::move(v));
}

} // namespace

TEST(HistFeatures, LayoutAndLevelsSumToOne) {
    const auto s = random_sample(1000, 1);
    const auto v = assemble_hist_features(s);
    ASSERT_EQ(v.size(), 517u);
    EXPECT_EQ(hist_feature_names().size(), 517u);
    for (std::size_t level = 0; level < pyramid_bins.size(); ++level) {
        double total = 0;
        for (std::size_t j = 0; j < pyramid_bins[level]; ++j) total += v[pyramid_offset(level) + j];
        EXPECT_NEAR(total, 1.0, 1e-12) << "level " << level;
    }
}

TEST(HistFeatures, CoarseLevelsAreBinSumsOfTheFinestLevel) {
    const auto s = random_sample(777, 2);
    const auto v = assemble_hist_features(s);
    // Oracle: count straight into 256 / 2^k wide bins.
    for (std::size_t level = 0; level < pyramid_bins.size(); ++level) {
        const std::size_t width = 256 / pyramid_bins[level];
        std::vector<double> expect(pyramid_bins[level], 0.0);
        for (auto x : s.values) expect[x / width] += 1.0 / double(s.values.size());
        for (std::size_t j = 0; j < expect.size(); ++j) EXPECT_NEAR(v[pyramid_offset(level) + j], expect[j], 1e-12);
    }
}

TEST(QuartileStats, TwoLevelSample) {
    const auto st = quartile_stats(sample_of({0, 0, 255, 255}));
    EXPECT_EQ(st.q1, 0);
    EXPECT_EQ(st.q2, 0);
    EXPECT_EQ(st.q3, 255);
    EXPECT_EQ(st.q4, 255);
    EXPECT_DOUBLE_EQ(st.mean, 127.5);
    EXPECT_DOUBLE_EQ(st.median, 127.5);
    EXPECT_NEAR(st.skewness, 0.0, 1e-12);
    EXPECT_NEAR(st.kurtosis, 1.0, 1e-12);
}

TEST(QuartileStats, ConstantSampleHasZeroShapeMoments) {
    const auto st = quartile_stats(sample_of(std::vector<std::uint8_t>(50, 77)));
    EXPECT_EQ(st.q1, 77);
    EXPECT_EQ(st.q4, 77);
    EXPECT_EQ(st.mean, 77);
    EXPECT_EQ(st.median, 77);
    EXPECT_EQ(st.skewness, 0.0);
    EXPECT_EQ(st.kurtosis, 0.0);
}

TEST(QuartileStats, MatchesSortedOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = random_sample(1 + seed * 37, seed);
        auto sorted = s.values;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        const auto st = quartile_stats(s);
        // q_k: the ceil(k n / 4)-th smallest value (1-based).
        const double q[4] = {st.q1, st.q2, st.q3, st.q4};
        for (std::size_t k = 1; k <= 4; ++k) EXPECT_EQ(q[k - 1], sorted[(k * n + 3) / 4 - 1]) << "seed " << seed;
        const double med = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        EXPECT_EQ(st.median, med);
        double mean = 0;
        for (auto x : sorted) mean += x;
        mean /= double(n);
        double m2 = 0, m3 = 0;
        for (auto x : sorted) m2 += (x - mean) * (x - mean), m3 += std::pow(x - mean, 3);
        m2 /= double(n);
        m3 /= double(n);
        EXPECT_NEAR(st.mean, mean, 1e-9);
        if (m2 > 0) {
            EXPECT_NEAR(st.skewness, m3 / std::pow(m2, 1.5), 1e-9);
        }
    }
}

TEST(HScore, BandExtremesAndMix) {
    EXPECT_DOUBLE_EQ(h_score(sample_of(std::vector<std::uint8_t>(10, 0))), 400.0);
    EXPECT_DOUBLE_EQ(h_score(sample_of(std::vector<std::uint8_t>(10, 63))), 400.0);
    EXPECT_DOUBLE_EQ(h_score(sample_of(std::vector<std::uint8_t>(10, 255))), 100.0);
    EXPECT_DOUBLE_EQ(h_score(sample_of(std::vector<std::uint8_t>(10, 192))), 100.0);
    EXPECT_DOUBLE_EQ(h_score(sample_of({10, 200})), 250.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const double h = h_score(random_sample(500, seed));
        EXPECT_GE(h, 100.0);
        EXPECT_LE(h, 400.0);
    }
}

TEST(HistFeatures, PermutationInvariant) {
    auto s = random_sample(400, 3);
    const auto a = assemble_hist_features(s);
    std::reverse(s.values.begin(), s.values.end());
    EXPECT_EQ(assemble_hist_features(s), a);
}

TEST(HistFeatures, EmptySampleIsAnError) {
    EXPECT_ERROR_CODE(assemble_hist_features(sample_of({})), ErrorCode::empty_roi);
    EXPECT_ERROR_CODE(h_score(sample_of({})), ErrorCode::empty_roi);
}

TEST(Baseline, MeanOverForeground) {
    GrayImage g(4, 2, 0);
    BitMask all(4, 2);
    for (auto& v : all.values()) v = 1;
    EXPECT_EQ(mean_intensity_baseline(g, all), 0.0);
    GrayImage h(4, 2, 100);
    h.at(0, 0) = 250;
    BitMask some(4, 2);
    some.set(1, 0);
    some.set(2, 1);
    EXPECT_EQ(mean_intensity_baseline(h, some), 100.0);
    EXPECT_ERROR_CODE(mean_intensity_baseline(h, BitMask(4, 2)), ErrorCode::empty_roi);
    EXPECT_ERROR_CODE(mean_intensity_baseline(h, BitMask(3, 2)), ErrorCode::invalid_argument);
}

TEST(RoiSample, CollectsMaskedPixelsInScanOrder) {
    const GrayImage g = testutil::random_gray(10, 8, 6);
    RoiMask roi{BitMask(10, 8), 0};
    roi.mask.set(3, 1);
    roi.mask.set(0, 5);
    roi.pixel_count = 2;
    const auto s = collect_roi_sample(g, roi, "x");
    ASSERT_EQ(s.values.size(), 2u);
    EXPECT_EQ(s.values[0], g.at(3, 1));
    EXPECT_EQ(s.values[1], g.at(0, 5));
}
