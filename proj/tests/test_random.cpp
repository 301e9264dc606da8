#include <cmath>
#include <set>
#include <vector>

#include "mitotype/parallel.hpp"
#include "test_util.hpp"

using namespace mitotype;

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a();
        EXPECT_EQ(x, b());
        differs |= x != c();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, BelowStaysInRangeAndIsRoughlyUniform) {
    Rng rng(9);
    constexpr int k = 10, n = 100000;
    std::vector<int> hits(k, 0);
    for (int i = 0; i < n; ++i) {
        const auto v = rng.below(k);
        ASSERT_LT(v, std::uint64_t(k));
        ++hits[v];
    }
    double chi2 = 0;
    for (int h : hits) chi2 += (h - n / k) * double(h - n / k) / (n / k);
    // 9 degrees of freedom; 27.9 is the 0.999 quantile.
    EXPECT_LT(chi2, 27.9);
    EXPECT_EQ(rng.below(1), 0u);
}

TEST(Rng, UniformAndNormalMoments) {
    Rng rng(123);
    constexpr int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.015);
}

TEST(DeriveSeed, DistinctPerIndexAndStable) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(1, i));
    EXPECT_EQ(seen.size(), 10000u);
    EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
    EXPECT_NE(derive_seed(7, 3), derive_seed(8, 3));
}

TEST(ParallelFor, ResultIndependentOfThreadCount) {
    auto run = [](std::size_t threads) {
        std::vector<double> out(257);
        parallel_for(out.size(), threads, [&](std::size_t i) {
            Rng rng(derive_seed(5, i));
            out[i] = rng.uniform();
        });
        return out;
    };
    const auto one = run(1);
    EXPECT_EQ(run(4), one);
    EXPECT_EQ(run(0), one);
}
