#include <cmath>
#include <set>

#include "mitotype/evaluation.hpp"
#include "test_util.hpp"

using namespace mitotype;

namespace {

UnitPrediction unit(std::size_t label, std::vector<double> proba = {}) {
    if (proba.empty()) {
        proba.assign(3, 0.0);
        proba[label] = 1.0;
    }
    return {label, std::move(proba)};
}

// n patients per class; each patient has `spots` spots with `units` rows.
// Features: class c puts its signal on coordinate c, plus noise.
FeatureTable toy_cohort(std::size_t per_class, std::size_t spots, std::size_t units, double signal, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<FeatureRow> rows;
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 0; p < per_class; ++p) {
            const std::string pid = "P" + std::to_string(c) + std::to_string(p);
            for (std::size_t s = 0; s < spots; ++s)
                for (std::size_t u = 0; u < units; ++u) {
                    std::vector<double> v(4);
                    for (auto& x : v) x = rng.normal();
                    v[c] += signal;
                    const std::string sid = pid + "_s" + std::to_string(s);
                    rows.push_back({pid, sid, sid + "_u" + std::to_string(u), "orig", Subtype(c), Source::HIST, v});
                }
        }
    return FeatureTable(std::move(rows));
}

} // namespace

TEST(BalancedError, OnlyMiddleClassMissed) {
    ConfusionMatrix cm{};
    cm[0][0] = 3;
    cm[1][1] = 2;
    cm[1][0] = 1;
    cm[2][2] = 3;
    EXPECT_NEAR(balanced_error(cm), 1.0 / 9.0, 1e-12);
    EXPECT_NEAR(100 * balanced_error(cm), 11.11, 0.05);
}

TEST(BalancedError, PerfectAndEmptyClass) {
    ConfusionMatrix cm{};
    cm[0][0] = 1;
    cm[1][1] = 5;
    cm[2][2] = 2;
    EXPECT_EQ(balanced_error(cm), 0.0);
    cm[2][2] = 0;
    EXPECT_ERROR_CODE(balanced_error(cm), ErrorCode::empty_class);
}

TEST(Confidence, KnownValues) {
    // 1 - H(2/3, 1/3) / ln 3 evaluated directly: 0.420620 (often quoted as 0.4207).
    EXPECT_NEAR(label_confidence({0, 0, 1}), 0.420620, 1e-6);
    EXPECT_EQ(label_confidence({2, 2, 2, 2}), 1.0);
    EXPECT_NEAR(label_confidence({0, 1, 2}), 0.0, 1e-12);
    Rng rng(1);
    for (int t = 0; t < 200; ++t) {
        std::vector<std::size_t> l(1 + rng.below(12));
        for (auto& x : l) x = rng.below(3);
        const double c = label_confidence(l);
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0);
        const bool same = std::all_of(l.begin(), l.end(), [&](auto v) { return v == l[0]; });
        EXPECT_EQ(c == 1.0, same);
    }
}

TEST(Aggregate, WholeImageMajority) {
    const auto call = aggregate_patient({{unit(0), unit(0), unit(1)}}, AggregationMode::whole_image);
    EXPECT_EQ(call.label, 0u);
    EXPECT_NEAR(call.confidence, 0.420620, 1e-6);
    EXPECT_EQ(call.image_labels.size(), 3u);
}

TEST(Aggregate, PatchModeVotesPerSpotFirst) {
    // Spot 1: three CCP patches. Spots 2 and 3: one ONC patch each.
    // Unit majority would say CCP; spot majority says ONC.
    const std::vector<std::vector<UnitPrediction>> spots{{unit(1), unit(1), unit(1)}, {unit(2)}, {unit(2)}};
    EXPECT_EQ(aggregate_patient(spots, AggregationMode::whole_image).label, 1u);
    const auto call = aggregate_patient(spots, AggregationMode::patch);
    EXPECT_EQ(call.label, 2u);
    EXPECT_EQ(call.image_labels, (std::vector<std::size_t>{1, 2, 2}));
}

TEST(Aggregate, TiesUseMeanProbabilityThenClassOrder) {
    const auto a = aggregate_patient({{unit(0, {0.5, 0.4, 0.1}), unit(1, {0.1, 0.8, 0.1})}}, AggregationMode::whole_image);
    EXPECT_EQ(a.label, 1u);
    const auto b = aggregate_patient({{unit(2, {0.0, 0.5, 0.5}), unit(1, {0.0, 0.5, 0.5})}}, AggregationMode::whole_image);
    EXPECT_EQ(b.label, 1u);
    EXPECT_ERROR_CODE(aggregate_patient({{}}, AggregationMode::patch), ErrorCode::empty_patient);
}

TEST(Auc, RankStatisticMatchesTrapezoidAndPairCount) {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 4 + rng.below(30);
        std::vector<double> s(n);
        std::vector<bool> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = double(rng.below(6)); // plenty of ties
            pos[i] = i < 2 || (i >= 4 && rng.uniform() < 0.5);
        }
        pos[2] = pos[3] = false;
        const RocCurve roc = roc_auc(s, pos);
        // Oracle: fraction of (positive, negative) pairs ranked correctly, ties half.
        double good = 0, pairs = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (pos[i] && !pos[j]) {
                    pairs += 1;
                    good += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
                }
        EXPECT_NEAR(roc.auc, good / pairs, 1e-12);
        EXPECT_NEAR(trapezoid_area(roc.points), roc.auc, 1e-12);
        EXPECT_EQ(roc.points.front(), std::make_pair(0.0, 0.0));
        EXPECT_EQ(roc.points.back(), std::make_pair(1.0, 1.0));
    }
}

TEST(Auc, RandomScoresCenterOnOneHalf) {
    Rng rng(8);
    double sum = 0;
    for (int t = 0; t < 400; ++t) {
        std::vector<double> s(40);
        std::vector<bool> pos(40);
        for (std::size_t i = 0; i < 40; ++i) s[i] = rng.uniform(), pos[i] = i % 2;
        sum += roc_auc(s, pos).auc;
    }
    EXPECT_NEAR(sum / 400, 0.5, 0.02);
}

TEST(Auc, DegenerateLabels) {
    EXPECT_ERROR_CODE(roc_auc({1, 2}, {true, true}), ErrorCode::degenerate_class);
    EXPECT_ERROR_CODE(roc_auc({1, 2}, {true}), ErrorCode::invalid_argument);
}

TEST(Lopo, FoldsPartitionPatients) {
    const FeatureTable t = toy_cohort(3, 2, 2, 3.0, 1);
    const CohortIndex idx = CohortIndex::from_table(t);
    const auto folds = lopo_split(idx);
    ASSERT_EQ(folds.size(), 9u);
    std::multiset<std::size_t> tested;
    for (const auto& f : folds) {
        EXPECT_EQ(f.train_rows.size() + f.test_rows.size(), t.size());
        for (auto r : f.test_rows) {
            tested.insert(r);
            EXPECT_EQ(t.rows()[r].patient_id, idx.patients[f.test_patient].patient_id);
        }
        for (auto r : f.train_rows) EXPECT_NE(t.rows()[r].patient_id, idx.patients[f.test_patient].patient_id);
    }
    // Every row is tested exactly once.
    EXPECT_EQ(tested.size(), t.size());
    EXPECT_EQ(std::set<std::size_t>(tested.begin(), tested.end()).size(), t.size());
}

TEST(Lopo, RejectsTinyCohorts) {
    const FeatureTable two({{"A", "a", "a", "orig", Subtype::CC, Source::HIST, {1}}, {"B", "b", "b", "orig", Subtype::ONC, Source::HIST, {2}}});
    EXPECT_ERROR_CODE(lopo_split(CohortIndex::from_table(two)), ErrorCode::invalid_argument);
    const FeatureTable one_class({{"A", "a", "a", "orig", Subtype::CC, Source::HIST, {1}},
                                  {"B", "b", "b", "orig", Subtype::CC, Source::HIST, {2}},
                                  {"C", "c", "c", "orig", Subtype::CC, Source::HIST, {3}}});
    EXPECT_ERROR_CODE(lopo_split(CohortIndex::from_table(one_class)), ErrorCode::invalid_argument);
}

TEST(Lopo, SeparableCohortIsPerfectAndDeterministic) {
    const FeatureTable t = toy_cohort(4, 2, 3, 6.0, 2);
    LopoConfig cfg;
    cfg.train.n_trees = 25;
    cfg.train.seed = 7;
    const CvReport a = run_lopo(t, Source::HIST, cfg);
    EXPECT_EQ(a.balanced_error, 0.0);
    EXPECT_EQ(a.patients.size(), 12u);
    EXPECT_EQ(a.units.size(), t.size());
    for (const auto& roc : a.roc) {
        ASSERT_TRUE(roc.has_value());
        EXPECT_EQ(roc->auc, 1.0);
    }
    cfg.threads = 3;
    const CvReport b = run_lopo(t, Source::HIST, cfg);
    ASSERT_EQ(b.units.size(), a.units.size());
    for (std::size_t i = 0; i < a.units.size(); ++i) EXPECT_EQ(b.units[i].prediction.proba, a.units[i].prediction.proba);
    cfg.mode = AggregationMode::patch;
    EXPECT_EQ(run_lopo(t, Source::HIST, cfg).balanced_error, 0.0);
}

TEST(Lopo, RocSkippedWithSinglePositive) {
    std::vector<FeatureRow> rows;
    const Subtype labels[] = {Subtype::CC, Subtype::CC, Subtype::CCP, Subtype::CCP, Subtype::ONC};
    for (int p = 0; p < 5; ++p)
        for (int u = 0; u < 2; ++u) {
            const std::string id = "P" + std::to_string(p);
            rows.push_back({id, id, id + std::to_string(u), "orig", labels[p], Source::HIST, {double(labels[p]) + 0.1 * u}});
        }
    LopoConfig cfg;
    cfg.train.n_trees = 5;
    const CvReport rep = run_lopo(FeatureTable(rows), Source::HIST, cfg);
    EXPECT_FALSE(rep.roc[2].has_value());
    EXPECT_FALSE(rep.warnings.empty());
}

TEST(Sweep, GridRowsInOrder) {
    const FeatureTable t = toy_cohort(3, 1, 2, 5.0, 4);
    LopoConfig cfg;
    const auto rows = tree_count_sweep(t, Source::HIST, {1, 5, 10}, cfg);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].n_trees, 1u);
    EXPECT_EQ(rows[2].n_trees, 10u);
    for (const auto& r : rows) {
        EXPECT_GE(r.accuracy, 0.0);
        EXPECT_LE(r.accuracy, 1.0);
    }
    const auto single = tree_count_sweep(t, Source::HIST, {3}, cfg, 0);
    EXPECT_TRUE(std::isnan(single[0].balanced_error));
    EXPECT_ERROR_CODE(tree_count_sweep(t, Source::HIST, {3}, cfg, 99), ErrorCode::invalid_argument);
}
