#include <sstream>

#include "mitotype/feature_table.hpp"
#include "test_util.hpp"

using namespace mitotype;

namespace {

FeatureTable parse(const std::string& text) {
    std::istringstream in(text);
    return parse_feature_table(in, "t");
}

FeatureRow row(std::string p, std::string s, std::string u, Subtype l, Source src, std::vector<double> v,
               std::string variant = "orig") {
    return {std::move(p), std::move(s), std::move(u), std::move(variant), l, src, std::move(v)};
}

} // namespace

TEST(FeatureTable, ParsesRowsAndSkipsComments) {
    const auto t = parse("# made by hand\n"
                         "patient_id,spot_id,unit_id,variant,label,source,f0,f1\n"
                         "P1,S1,S1,orig,CC,HIST,0.5,1e-3\r\n"
                         "\n"
                         "P2,S2,S2,orig,ONC,HIST,-2,3\n");
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t.dimension(Source::HIST), 2u);
    EXPECT_EQ(t.rows()[0].values, (std::vector<double>{0.5, 1e-3}));
    EXPECT_EQ(t.rows()[1].label, Subtype::ONC);
}

TEST(FeatureTable, RoundTripIsExact) {
    Rng rng(4);
    std::vector<FeatureRow> rows;
    for (int i = 0; i < 30; ++i) {
        std::vector<double> v(7);
        for (auto& x : v) x = rng.normal(0, 1e3) * std::pow(10.0, double(rng.below(10)) - 5);
        const std::string p = "P" + std::to_string(i % 6);
        rows.push_back(row(p, p + "_s" + std::to_string(i), p + "_s" + std::to_string(i), Subtype(i % 6 % 3), Source::HIST, v));
    }
    const FeatureTable t(rows);
    std::ostringstream out;
    write_feature_table(out, t);
    // %.9g is not exact for doubles, so compare the re-serialized text.
    const FeatureTable back = parse(out.str());
    std::ostringstream again;
    write_feature_table(again, back);
    EXPECT_EQ(again.str(), out.str());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < 7; ++j) EXPECT_NEAR(back.rows()[i].values[j], rows[i].values[j], 1e-8 * std::abs(rows[i].values[j]));
}

TEST(FeatureTable, MixedSourcesKeepTheirOwnWidths) {
    const auto t = parse("patient_id,spot_id,unit_id,variant,label,source,f0,f1,f2\n"
                         "P1,S1,S1,orig,CC,HIST,1,2,3\n"
                         "P1,S1,S1,orig,CC,baseline,9\n");
    EXPECT_EQ(t.dimension(Source::HIST), 3u);
    EXPECT_EQ(t.dimension(Source::baseline), 1u);
    EXPECT_EQ(t.select(Source::baseline).size(), 1u);
}

TEST(FeatureTable, Errors) {
    const std::string h = "patient_id,spot_id,unit_id,variant,label,source,f0,f1\n";
    EXPECT_ERROR_CODE(parse(""), ErrorCode::empty_table);
    EXPECT_ERROR_CODE(parse(h), ErrorCode::empty_table);
    EXPECT_ERROR_CODE(parse("id,spot_id,unit_id,variant,label,source,f0\n"), ErrorCode::parse_error);
    EXPECT_ERROR_CODE(parse(h + "P1,S1,S1,orig,XX,HIST,1,2\n"), ErrorCode::unknown_label);
    EXPECT_ERROR_CODE(parse(h + "P1,S1,S1,orig,CC,HIST,1,abc\n"), ErrorCode::parse_error);
    EXPECT_ERROR_CODE(parse(h + "P1,S1,S1,orig,CC,HIST,1,nan\n"), ErrorCode::parse_error);
    EXPECT_ERROR_CODE(parse(h + "P1,S1,S1,orig,CC,HIST,1\n"), ErrorCode::dimension_mismatch);
    EXPECT_ERROR_CODE(parse(h + "P1,S1,S1,orig,CC,HIST,1,2,3\n"), ErrorCode::dimension_mismatch);
    EXPECT_ERROR_CODE(parse(h + "P1,S1,S1,orig,CC,HIST,1,2\nP1,S1,S1,orig,CC,HIST,1,2\n"), ErrorCode::duplicate_key);
    EXPECT_ERROR_CODE(parse(h + "P1,S1,S1,orig,CC,HIST,1,2\nP1,S2,S2,orig,ONC,HIST,1,2\n"), ErrorCode::parse_error);
    EXPECT_ERROR_CODE(parse(h + ",S1,S1,orig,CC,HIST,1,2\n"), ErrorCode::parse_error);
}

TEST(Combine, SpotLevelRowJoinsEveryUnit) {
    std::vector<FeatureRow> rows{row("P1", "S1", "S1", Subtype::CCP, Source::HIST, {1, 2})};
    for (int k = 0; k < 3; ++k)
        rows.push_back(row("P1", "S1", "S1_p" + std::to_string(k), Subtype::CCP, Source::fc7, {10.0 + k}, "patch"));
    const FeatureTable out = concatenate_sources(FeatureTable(rows), {Source::HIST, Source::fc7});
    ASSERT_EQ(out.size(), 3u);
    for (int k = 0; k < 3; ++k) {
        const auto& r = out.rows()[k];
        EXPECT_EQ(r.source, Source::combined);
        EXPECT_EQ(r.unit_id, "S1_p" + std::to_string(k));
        EXPECT_EQ(r.values, (std::vector<double>{1, 2, 10.0 + k}));
        EXPECT_EQ(r.label, Subtype::CCP);
    }
    // Part order follows the request.
    const FeatureTable flipped = concatenate_sources(FeatureTable(rows), {Source::fc7, Source::HIST});
    EXPECT_EQ(flipped.rows()[0].values, (std::vector<double>{10, 1, 2}));
}

TEST(Combine, MissingSourceIsIncomplete) {
    const FeatureTable t({row("P1", "S1", "u1", Subtype::CC, Source::fc6, {1}), row("P1", "S2", "u2", Subtype::CC, Source::fc6, {2}),
                          row("P1", "S1", "u1", Subtype::CC, Source::fc7, {3})});
    EXPECT_ERROR_CODE(concatenate_sources(t, {Source::fc6, Source::fc7}), ErrorCode::incomplete_unit);
    EXPECT_ERROR_CODE(concatenate_sources(t, {Source::fc6, Source::fc8}), ErrorCode::incomplete_unit);
}

TEST(SubtypeNames, RoundTrip) {
    for (Subtype s : {Subtype::CC, Subtype::CCP, Subtype::ONC}) EXPECT_EQ(parse_subtype(to_string(s)), s);
    EXPECT_FALSE(parse_subtype("cc").has_value());
}
