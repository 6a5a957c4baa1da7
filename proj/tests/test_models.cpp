#include <doctest.h>

#include <set>

#include "agb/models.hpp"
#include "agb/parallel.hpp"
#include "agb/random.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace agb;

namespace {

FeatureTable sine_table(std::uint64_t seed, int n = 30) {
    Rng rng(seed);
    FeatureTable t;
    t.names = {"x", "z"};
    t.columns.resize(2);
    t.target_name = "AGBt";
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(0.0, 6.0);
        t.plot_ids.push_back("P" + std::to_string(i));
        t.columns[0].push_back(x);
        t.columns[1].push_back(rng.normal());
        t.target.push_back(50.0 + 10.0 * std::sin(x) + rng.normal(0.0, 0.5));
    }
    return t;
}

}  // namespace

TEST_CASE("ols fit and rank deficiency") {
    FeatureTable t;
    t.plot_ids = {"a", "b", "c", "d", "e"};
    t.names = {"x", "twice"};
    t.columns = {{1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}};
    t.target = {3, 5, 7, 9, 11};
    const OlsModel m = fit_ols_subset(t, {"x"});
    CHECK(m.coefficients[0] == doctest::Approx(2.0));
    CHECK(m.intercept == doctest::Approx(1.0));
    CHECK(m.loo_rmse == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(fit_ols_subset(t, {"x", "twice"}), NumericalError);

    std::vector<std::vector<std::string>> skipped;
    const OlsModel best = fit_ols(t, {"x", "twice"}, 2, &skipped);
    CHECK(best.names == std::vector<std::string>{"x"});
    CHECK(skipped.size() == 1);
}

TEST_CASE("r squared") {
    const std::vector<double> a{1, 2, 3}, b{2, 4, 7}, k{1, 1, 1};
    CHECK(*r_squared(a, a) == doctest::Approx(1.0));
    CHECK(*r_squared(a, b) < 1.0);
    CHECK_FALSE(r_squared(k, a).has_value());
}

TEST_CASE("smo agrees with the interior point oracle") {
    Rng rng(5);
    const int n = 15;
    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    Eigen::MatrixXd ke(n, n);
    std::vector<double> x(n), y(n);
    Eigen::VectorXd ye(n);
    for (int i = 0; i < n; ++i) {
        x[i] = rng.uniform(-2.0, 2.0);
        y[i] = ye(i) = x[i] * x[i] - 1.0 + rng.normal(0.0, 0.1);
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) k[i][j] = ke(i, j) = std::exp(-(x[i] - x[j]) * (x[i] - x[j]));
    const SvrDual d = solve_svr_dual(k, y, 2.0);
    const auto ref = agb::testing::solve_svr_qp(ke, ye, 2.0, 0.1);
    CHECK(d.gap <= 1e-6);
    for (int i = 0; i < n; ++i) {
        double f = d.bias, g = ref.bias;
        for (int j = 0; j < n; ++j) {
            f += d.beta[j] * k[i][j];
            g += ref.beta[j] * k[i][j];
        }
        CHECK(f == doctest::Approx(g).epsilon(1e-5));
        CHECK(std::abs(d.beta[i]) <= 2.0 + 1e-12);
    }
}

TEST_CASE("svr fits a smooth target") {
    const FeatureTable t = sine_table(1);
    const SvrModel m = fit_svr(t, {"x"}, 1.0, 5.0);
    const auto pred = m.predict(t);
    double worst = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) worst = std::max(worst, std::abs(pred[i] - t.target[i]));
    CHECK(worst < 3.0);
    CHECK(svr_kkt_residual(m, t) <= 1e-6);
}

TEST_CASE("80/20 split") {
    const Split s = split_80_20(11, 7);
    CHECK(s.train.size() == 9);
    CHECK(s.test.size() == 2);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 11);
    CHECK(split_80_20(11, 7).train == s.train);
    CHECK(split_80_20(11, 8).train != s.train);
    CHECK_THROWS_AS(split_80_20(4, 1), DataError);
}

TEST_CASE("grid search is deterministic across thread counts") {
    const FeatureTable t = sine_table(2, 20);
    const std::vector<double> sig{0.5, 1.0}, cost{1.0, 5.0};
    thread_count() = 1;
    const GridResult a = grid_search(t, {"x"}, sig, cost, {123, 3});
    thread_count() = 3;
    const GridResult b = grid_search(t, {"x"}, sig, cost, {123, 3});
    thread_count() = 0;
    REQUIRE(a.surface.size() == 4);
    CHECK(a.sigma == b.sigma);
    CHECK(a.cost == b.cost);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.surface[i].rmse == b.surface[i].rmse);
    double best = a.surface[0].rmse;
    for (const auto& c : a.surface) best = std::min(best, c.rmse);
    CHECK(a.rmse == best);
    CHECK(surface_to_csv(a).rows.size() == 4);
}

TEST_CASE("model files round trip") {
    const FeatureTable t = sine_table(3, 12);
    const auto dir = agb::testing::scratch_dir("models");
    FittedModel svr{ModelKind::svr, "AGBt", {}, fit_svr(t, {"x", "z"}, 0.5, 2.0)};
    write_model(dir / "s.model", svr);
    const FittedModel s2 = read_model(dir / "s.model");
    CHECK(s2.kind == ModelKind::svr);
    CHECK(s2.predict(t) == svr.predict(t));

    FittedModel ols{ModelKind::ols, "AGBt", fit_ols_subset(t, {"x", "z"}), {}};
    write_model(dir / "o.model", ols);
    const FittedModel o2 = read_model(dir / "o.model");
    CHECK(o2.names() == ols.names());
    CHECK(o2.predict(t) == ols.predict(t));
}
