#include <doctest.h>

#include <cmath>

#include "agb/error.hpp"
#include "agb/evaluate.hpp"

using namespace agb;

TEST_CASE("error metrics on a small example") {
    const std::vector<double> p{110, 90, 100}, o{100, 100, 100};
    CHECK(mae(p, o) == doctest::Approx(20.0 / 3.0));
    CHECK(rmse(p, o) == doctest::Approx(std::sqrt(200.0 / 3.0)));
    CHECK(mean_pct_error(p, o) == doctest::Approx(20.0 / 3.0));
    const auto s = summarize(p, o);
    CHECK(s.n == 3);
    CHECK(s.accuracy == doctest::Approx(100.0 - 20.0 / 3.0));
    CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), DataError);
    CHECK_THROWS_AS(rmse(p, std::vector<double>{1}), DataError);
    CHECK_THROWS_AS(pct_errors(p, std::vector<double>{1, 0, 1}), DataError);
}

TEST_CASE("paired t-test edge cases and a known value") {
    const std::vector<double> a{1, 2, 3, 4}, b{1, 2, 3, 4};
    CHECK(paired_t_test(a, b).p == 1.0);
    const std::vector<double> shifted{2, 3, 4, 5};
    CHECK(paired_t_test(shifted, a).p == 0.0);

    // differences 1, 2, 3: mean 2, sd 1, t = 2 sqrt(3), df 2
    const std::vector<double> x{1, 2, 3}, y{0, 0, 0};
    const auto t = paired_t_test(x, y);
    CHECK(t.t == doctest::Approx(2.0 * std::sqrt(3.0)));
    CHECK(t.df == 2.0);
    CHECK(t.p == doctest::Approx(0.07417990022744858).epsilon(1e-9));
    CHECK_THROWS_AS(paired_t_test(std::vector<double>{1, 2}, std::vector<double>{1, 2}), DataError);
}

TEST_CASE("bonferroni caps at one") {
    CHECK(bonferroni(0.02, 3) == doctest::Approx(0.06));
    CHECK(bonferroni(0.5, 3) == 1.0);
}

TEST_CASE("model comparison covers every pair") {
    std::vector<SystemErrors> sys{{"A", {1, 2, 3, 4}}, {"B", {2, 3, 4, 6}}, {"C", {1, 2, 3, 4}}};
    const auto pairs = compare_models(sys);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].first == "A");
    CHECK(pairs[0].second == "B");
    CHECK(pairs[0].difference == doctest::Approx(-1.25));
    CHECK(pairs[1].p_raw == 1.0);
    for (const auto& pc : pairs) CHECK(pc.p_adjusted == doctest::Approx(bonferroni(pc.p_raw, 3)));

    const CsvTable m = comparison_matrix(sys, pairs);
    CHECK(m.rows.size() == 3);
    CHECK(comparison_text(sys, pairs).find("B") != std::string::npos);
}
