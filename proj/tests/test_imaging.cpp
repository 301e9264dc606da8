#include <algorithm>
#include <cmath>
#include <set>

#include "mitotype/imaging.hpp"
#include "test_util.hpp"

using namespace mitotype;

namespace {

NormalizedHistogram uniform(std::size_t bins) {
    std::vector<double> c(bins, 1.0);
    return NormalizedHistogram::from_counts(std::span<const double>(c));
}

RasterImage constant(std::size_t w, std::size_t h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    RasterImage img(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) img.set(x, y, r, g, b);
    return img;
}

} // namespace

TEST(Grayscale, LuminanceValues) {
    EXPECT_EQ(luminance(255, 0, 0), 76);
    EXPECT_EQ(luminance(0, 0, 0), 0);
    EXPECT_EQ(luminance(255, 255, 255), 255);
    const GrayImage g = to_grayscale(constant(4, 3, 255, 255, 255));
    for (auto v : g.values()) EXPECT_EQ(v, 255);
}

TEST(Grayscale, MatchesFormulaOnRandomPixels) {
    const RasterImage img = testutil::random_image(32, 32, 7);
    const GrayImage g = to_grayscale(img);
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x) {
            const double l = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
            EXPECT_LE(std::abs(g.at(x, y) - l), 0.5 + 1e-9);
        }
}

TEST(Entropy, KnownValues) {
    EXPECT_NEAR(shannon_entropy(uniform(256)), std::log(256.0), 1e-12);
    std::vector<double> delta(256, 0.0);
    delta[17] = 1.0;
    EXPECT_EQ(shannon_entropy(NormalizedHistogram::from_masses(delta)), 0.0);
    EXPECT_NEAR(shannon_entropy(NormalizedHistogram::from_masses({0.5, 0.5})), std::log(2.0), 1e-15);
    EXPECT_NEAR(shannon_entropy(uniform(256), LogBase::two), 8.0, 1e-12);
}

TEST(Entropy, EmptyHistogramIsAnError) {
    std::vector<double> zeros(16, 0.0);
    EXPECT_ERROR_CODE(shannon_entropy(NormalizedHistogram::from_counts(std::span<const double>(zeros))), ErrorCode::empty_histogram);
}

TEST(Entropy, BoundedAndIncreasesTowardUniform) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t bins = std::size_t{4} << rng.below(7);
        std::vector<double> c(bins);
        for (auto& v : c) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
        c[0] += 1e-3;
        const auto h = NormalizedHistogram::from_counts(std::span<const double>(c));
        const double e = shannon_entropy(h);
        EXPECT_GE(e, 0.0);
        EXPECT_LE(e, std::log(static_cast<double>(bins)) + 1e-12);
        std::vector<double> mixed(bins);
        for (std::size_t i = 0; i < bins; ++i) mixed[i] = 0.5 * h[i] + 0.5 / static_cast<double>(bins);
        EXPECT_GE(shannon_entropy(NormalizedHistogram::from_counts(std::span<const double>(mixed))), e - 1e-12);
    }
}

TEST(Entropy, CountsAgreeWithNormalizedHistogram) {
    const GrayImage g = testutil::random_gray(40, 30, 3);
    const auto counts = region_counts(g, 0, 0, 40, 30);
    EXPECT_NEAR(entropy_of_counts(counts), shannon_entropy(gray_histogram(g)), 1e-12);
}

TEST(WhiteBalance, ConstantImageBecomesWhite) {
    const RasterImage out = white_balance(constant(120, 120, 200, 200, 200), {});
    for (auto s : out.samples()) EXPECT_EQ(s, 255);
}

TEST(WhiteBalance, WhiteImageUnchanged) {
    const RasterImage in = constant(150, 150, 255, 255, 255);
    EXPECT_EQ(white_balance(in, {}), in);
}

TEST(WhiteBalance, FlatBorderIsChosenAsBackground) {
    RasterImage img = constant(300, 300, 240, 236, 230);
    const RasterImage busy = testutil::random_image(100, 100, 5);
    for (std::size_t y = 0; y < 100; ++y)
        for (std::size_t x = 0; x < 100; ++x)
            img.set(100 + x, 100 + y, busy.at(x, y, 0), busy.at(x, y, 1), busy.at(x, y, 2));
    const BackgroundEstimate bg = estimate_background(img, {});
    EXPECT_EQ(bg.entropy, 0.0);
    EXPECT_EQ(bg.x, 0u);
    EXPECT_EQ(bg.y, 0u);
    const RasterImage out = apply_white_balance(img, bg.color);
    for (std::size_t x = 0; x < 300; ++x)
        for (std::size_t c = 0; c < 3; ++c) {
            EXPECT_GE(out.at(x, 0, c), 254);
            EXPECT_GE(out.at(x, 299, c), 254);
        }
}

TEST(WhiteBalance, ScalesEachChannelByBackground) {
    const RasterImage img = testutil::random_image(8, 8, 9);
    const std::array<double, 3> bg{200.0, 180.0, 250.0};
    const RasterImage out = apply_white_balance(img, bg);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const double expect = std::min(255.0, std::round(img.at(x, y, c) / bg[c] * 255.0));
                EXPECT_EQ(out.at(x, y, c), expect);
            }
}

TEST(WhiteBalance, IdempotentWithinOneLevel) {
    RasterImage img = constant(300, 300, 238, 232, 228);
    const RasterImage busy = testutil::random_image(80, 80, 21);
    for (std::size_t y = 0; y < 80; ++y)
        for (std::size_t x = 0; x < 80; ++x)
            img.set(120 + x, 120 + y, busy.at(x, y, 0), busy.at(x, y, 1), busy.at(x, y, 2));
    const RasterImage once = white_balance(img, {});
    const RasterImage twice = white_balance(once, {});
    for (std::size_t i = 0; i < once.samples().size(); ++i) EXPECT_LE(std::abs(once.samples()[i] - twice.samples()[i]), 1);
}

TEST(WhiteBalance, Errors) {
    EXPECT_ERROR_CODE(white_balance(constant(120, 120, 0, 10, 10), {}), ErrorCode::black_background);
    WhiteBalanceConfig cfg;
    cfg.window = 200;
    EXPECT_ERROR_CODE(white_balance(constant(120, 120, 9, 10, 10), cfg), ErrorCode::invalid_argument);
}

TEST(WhiteBalance, TiesKeepFirstWindow) {
    // Two flat regions with zero entropy; the earlier one in scan order wins.
    RasterImage img = constant(200, 100, 200, 200, 200);
    for (std::size_t y = 0; y < 100; ++y)
        for (std::size_t x = 100; x < 200; ++x) img.set(x, y, 100, 100, 100);
    const auto bg = estimate_background(img, {});
    EXPECT_EQ(bg.x, 0u);
    EXPECT_DOUBLE_EQ(bg.color[0], 200.0);
}

TEST(StainBasis, VectorsAreUnitLength) {
    const StainBasis b = StainBasis::hematoxylin_dab();
    for (std::size_t s = 0; s < 3; ++s) {
        const auto& v = b.vector(s);
        EXPECT_NEAR(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]), 1.0, 1e-9);
    }
    EXPECT_TRUE(std::isfinite(b.condition_number()));
}

TEST(StainBasis, SingularBasisRejected) {
    EXPECT_ERROR_CODE(StainBasis::from_vectors({1, 0, 0}, {2, 0, 0}, Vec3{0, 0, 1}), ErrorCode::degenerate_stain_basis);
    EXPECT_ERROR_CODE(StainBasis::from_vectors({1, 1, 0}, {0, 1, 1}, Vec3{1, 2, 1}), ErrorCode::degenerate_stain_basis);
    EXPECT_ERROR_CODE(StainBasis::from_vectors({0, 0, 0}, {0, 1, 1}), ErrorCode::degenerate_stain_basis);
}

TEST(Deconvolution, WhitePixelHasNoStain) {
    const auto ch = color_deconvolve(constant(3, 3, 255, 255, 255), StainBasis::hematoxylin_dab());
    for (const auto& c : ch)
        for (auto v : c.values()) EXPECT_EQ(v, 255);
}

TEST(Deconvolution, SingleStainPixel) {
    const StainBasis b = StainBasis::hematoxylin_dab();
    for (std::size_t s = 0; s < 2; ++s) {
        Vec3 amounts{0, 0, 0};
        amounts[s] = 1.0;
        const Vec3 rgb = synthesize_intensity(b, amounts);
        const auto ch = color_deconvolve(constant(1, 1, clamp_round_u8(rgb[0]), clamp_round_u8(rgb[1]), clamp_round_u8(rgb[2])), b);
        EXPECT_NEAR(ch[s][0], 26, 2);
        for (std::size_t o = 0; o < 3; ++o)
            if (o != s) {
                EXPECT_GE(ch[o][0], 250);
            }
    }
}

TEST(Deconvolution, ContinuousRoundTripWithinQuantum) {
    const StainBasis b = StainBasis::hematoxylin_dab();
    Rng rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const Vec3 a{rng.uniform(), rng.uniform(), rng.uniform()};
        const Vec3 back = stain_amounts(b, synthesize_intensity(b, a));
        for (std::size_t s = 0; s < 3; ++s) worst = std::max(worst, std::abs(back[s] - a[s]));
    }
    EXPECT_LE(worst, 1.0 / 255.0);
    EXPECT_LT(worst, 1e-9);
}

// With 8-bit input the only error source is rounding each intensity, so the
// amount error is bounded by |U| applied to the per-channel OD rounding error.
TEST(Deconvolution, QuantizedRoundTripWithinPropagatedBound) {
    const StainBasis b = StainBasis::hematoxylin_dab();
    const Mat3& u = b.unmixing();
    Rng rng(77);
    for (int i = 0; i < 20000; ++i) {
        const Vec3 a{rng.uniform(), rng.uniform(), rng.uniform()};
        const Vec3 exact = synthesize_intensity(b, a);
        Vec3 rounded{}, dod{};
        for (std::size_t c = 0; c < 3; ++c) {
            rounded[c] = clamp_round_u8(exact[c]);
            dod[c] = std::abs(optical_density(rounded[c]) - optical_density(std::max(exact[c], 1.0)));
        }
        const Vec3 back = stain_amounts(b, rounded);
        for (std::size_t s = 0; s < 3; ++s) {
            const double bound = std::abs(u[s][0]) * dod[0] + std::abs(u[s][1]) * dod[1] + std::abs(u[s][2]) * dod[2];
            EXPECT_LE(std::abs(back[s] - a[s]), bound + 1e-12);
        }
    }
}

TEST(Deconvolution, ChannelsMatchPerPixelAmounts) {
    const StainBasis b = StainBasis::hematoxylin_dab();
    const RasterImage img = testutil::random_image(16, 16, 4);
    const auto ch = color_deconvolve(img, b);
    for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) {
            const Vec3 a = stain_amounts(b, {double(img.at(x, y, 0)), double(img.at(x, y, 1)), double(img.at(x, y, 2))});
            for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(ch[s].at(x, y), render_stain(a[s]));
        }
}

TEST(GaussianBlur, KernelShape) {
    const auto k = gaussian_kernel(2.0);
    ASSERT_EQ(k.size(), 13u);
    double total = 0;
    for (double w : k) total += w;
    EXPECT_NEAR(total, 1.0, 1e-15);
    for (std::size_t i = 0; i < k.size(); ++i) EXPECT_DOUBLE_EQ(k[i], k[k.size() - 1 - i]);
    EXPECT_ERROR_CODE(gaussian_kernel(0.0), ErrorCode::invalid_argument);
}

TEST(GaussianBlur, ConstantUnchanged) {
    const GrayImage g(20, 15, 123);
    EXPECT_EQ(gaussian_blur(g, 2.0), g);
}

TEST(GaussianBlur, ImpulseCenterMatchesKernelProduct) {
    // Independent oracle: 1-D weights w_i = exp(-i^2 / 8) / sum.
    double sum = 0;
    for (int i = -6; i <= 6; ++i) sum += std::exp(-i * i / 8.0);
    const double center = 1.0 / sum;
    GrayImage g(41, 41, 0);
    g.at(20, 20) = 255;
    const GrayImage out = gaussian_blur(g, 2.0);
    EXPECT_EQ(out.at(20, 20), static_cast<int>(std::lround(center * center * 255.0)));
    std::uint64_t total = 0;
    for (auto v : out.values()) total += v;
    EXPECT_NEAR(static_cast<double>(total), 255.0, 0.5 * 169);
}

TEST(GaussianBlur, ReplicatedBorder) {
    // A vertical step at the left edge: clamped borders keep column 0 of a
    // constant-per-column image equal to a weighted sum over replicated values.
    GrayImage g(10, 10, 0);
    for (std::size_t y = 0; y < 10; ++y) g.at(0, y) = 200;
    const GrayImage out = gaussian_blur(g, 1.0);
    const auto k = gaussian_kernel(1.0); // radius 3
    const double expect = 200.0 * (k[0] + k[1] + k[2] + k[3]);
    EXPECT_EQ(out.at(0, 5), static_cast<int>(std::lround(expect)));
}

TEST(Threshold, Partitions) {
    EXPECT_EQ(threshold_mask(GrayImage(10, 10, 255), 230, Keep::below).count(), 0u);
    EXPECT_EQ(threshold_mask(GrayImage(10, 10, 0), 230, Keep::below).count(), 100u);
    GrayImage half(10, 10, 255);
    for (std::size_t y = 0; y < 10; ++y)
        for (std::size_t x = 0; x < 5; ++x) half.at(x, y) = 0;
    const BitMask m = threshold_mask(half, 230, Keep::below);
    for (std::size_t y = 0; y < 10; ++y)
        for (std::size_t x = 0; x < 10; ++x) EXPECT_EQ(m.test(x, y), x < 5);

    const GrayImage r = testutil::random_gray(30, 30, 8);
    for (int t : {0, 17, 128, 230, 255}) {
        const BitMask lo = threshold_mask(r, t, Keep::below), hi = threshold_mask(r, t, Keep::above);
        for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NE(lo[i], hi[i]);
    }
    EXPECT_ERROR_CODE(threshold_mask(r, 256, Keep::below), ErrorCode::invalid_argument);
}

TEST(Augment, EightVariantsIdentityFirst) {
    const RasterImage img = testutil::random_image(9, 9, 1);
    const auto v = augment_variants(img);
    ASSERT_EQ(v.size(), 8u);
    EXPECT_EQ(v[0].image, img);
    EXPECT_EQ(v[0].tag, "orig");
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = i + 1; j < 8; ++j) EXPECT_FALSE(v[i].image == v[j].image) << v[i].tag << " vs " << v[j].tag;
}

TEST(Augment, ConstantImageGivesIdenticalVariants) {
    const RasterImage img = constant(5, 5, 10, 20, 30);
    for (const auto& v : augment_variants(img)) EXPECT_EQ(v.image, img);
}

TEST(Augment, ClockwiseRotationAndFlip) {
    RasterImage img(2, 2, 0);
    img.at(0, 0, 0) = 1; // top-left
    img.at(1, 0, 0) = 2; // top-right
    img.at(1, 1, 0) = 3;
    img.at(0, 1, 0) = 4;
    const auto v = augment_variants(img);
    // rot90 clockwise: the old bottom-left moves to the top-left.
    EXPECT_EQ(v[1].image.at(0, 0, 0), 4);
    EXPECT_EQ(v[1].image.at(1, 0, 0), 1);
    // flip: left-right mirror.
    EXPECT_EQ(v[4].image.at(0, 0, 0), 2);
    EXPECT_EQ(v[4].image.at(1, 0, 0), 1);
}

TEST(Augment, OrbitIsClosed) {
    const RasterImage img = testutil::random_image(6, 6, 12);
    auto key = [](const std::vector<AugmentedVariant>& vs) {
        std::multiset<std::vector<std::uint8_t>> s;
        for (const auto& v : vs) s.emplace(v.image.samples().begin(), v.image.samples().end());
        return s;
    };
    const auto base = key(augment_variants(img));
    for (const auto& v : augment_variants(img)) EXPECT_EQ(key(augment_variants(v.image)), base) << v.tag;
}

TEST(Augment, CountsAndErrors) {
    std::size_t rows = 0;
    for (int i = 0; i < 75; ++i) rows += augment_variants(RasterImage(4, 4, static_cast<std::uint8_t>(i))).size();
    EXPECT_EQ(rows, 600u);
    EXPECT_ERROR_CODE(augment_variants(RasterImage(4, 5)), ErrorCode::non_square);
}
