#include <doctest.h>

#include "agb/features.hpp"

using namespace agb;

namespace {

FeatureTable table3() {
    FeatureTable t;
    t.plot_ids = {"a", "b", "c", "d", "e", "f"};
    t.names = {"lin", "dup", "noise", "flat"};
    t.columns = {{1, 2, 3, 4, 5, 6}, {2, 4, 6, 8, 10, 12.5}, {1, -1, -1, 1, 1, -1}, {7, 7, 7, 7, 7, 7}};
    t.target_name = "AGBt";
    t.target = {10, 20, 30, 40, 50, 60};
    return t;
}

}  // namespace

TEST_CASE("pearson") {
    const std::vector<double> a{1, 2, 3}, b{2, 4, 6}, c{3, 2, 1}, k{1, 1, 1};
    CHECK(*pearson(a, b) == doctest::Approx(1.0));
    CHECK(*pearson(a, c) == doctest::Approx(-1.0));
    CHECK_FALSE(pearson(a, k).has_value());
}

TEST_CASE("zero-variance and correlation filters") {
    FeatureTable t = table3();
    CHECK(drop_zero_variance(t) == std::vector<std::string>{"flat"});
    const auto drops = correlation_filter(t);
    REQUIRE(drops.size() == 1);
    CHECK(drops[0].name == "dup");
    CHECK(drops[0].kept == "lin");
    CHECK(t.names == std::vector<std::string>{"lin", "noise"});
}

TEST_CASE("all-constant table fails") {
    FeatureTable t = table3().subset_columns(std::vector<std::string>{"flat"});
    CHECK_THROWS_AS(drop_zero_variance(t), DataError);
}

TEST_CASE("importance is min-max normalized") {
    FeatureTable t = table3().subset_columns(std::vector<std::string>{"lin", "noise"});
    const auto s = importance(t);
    REQUIRE(s.size() == 2);
    CHECK(s[0].second == doctest::Approx(1.0));
    CHECK(s[1].second == doctest::Approx(0.0));
}

TEST_CASE("selection rules") {
    const auto plain = select({{"a", 0.9}, {"b", 0.7}, {"c", 0.6}, {"d", 0.1}});
    CHECK(plain.names == std::vector<std::string>{"a", "b", "c"});
    CHECK_FALSE(plain.fallback_used);

    std::vector<std::pair<std::string, double>> many;
    for (int i = 0; i < 8; ++i) many.emplace_back("v" + std::to_string(i), 0.9 - 0.01 * i);
    CHECK(select(many).names.size() == 5);

    const auto fb = select({{"a", 0.1}, {"b", 0.2}});
    CHECK(fb.fallback_used);
    CHECK(fb.names == std::vector<std::string>{"b", "a"});
}

TEST_CASE("assembly joins on plot id and drops incomplete columns") {
    MetricVector m1{"P1", SystemTag::als_d, {}}, m2{"P2", SystemTag::als_d, {}}, m3{"P3", SystemTag::als_d, {}};
    m1.add("x", 1.0);
    m1.add("y", std::nullopt);
    m2.add("x", 2.0);
    m2.add("y", 5.0);
    m3.add("x", 3.0);
    m3.add("y", 6.0);
    std::vector<PlotTotals> totals(2);
    totals[0].plot_id = "P2";
    totals[0].agbt = 20.0;
    totals[0].agbm = 200.0;
    totals[1].plot_id = "P1";
    totals[1].agbt = 10.0;
    totals[1].agbm = 100.0;
    std::vector<std::string> dropped;
    const FeatureTable t = assemble_features({m1, m2, m3}, totals, "AGBm", &dropped);
    CHECK(t.rows() == 2);
    CHECK(t.names == std::vector<std::string>{"x"});
    CHECK(dropped == std::vector<std::string>{"y"});
    CHECK(t.target[t.plot_ids[0] == "P1" ? 0 : 1] == 100.0);

    const FeatureTable back = features_from_csv(features_to_csv(t), "AGBm");
    CHECK(back.columns == t.columns);
    CHECK(back.target == t.target);
}

TEST_CASE("selection report json round trip") {
    const SelectionReport r = run_selection(table3());
    CHECK(r.dropped_zero_variance == std::vector<std::string>{"flat"});
    CHECK_FALSE(r.selected.empty());
    const SelectionReport back = report_from_json(report_to_json(r));
    CHECK(back.selected == r.selected);
    CHECK(back.dropped_correlated.size() == r.dropped_correlated.size());
    CHECK(back.target == r.target);
}
