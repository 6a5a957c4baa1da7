#include <doctest.h>

#include "agb/discrete_metrics.hpp"
#include "oracles.hpp"

using namespace agb;

TEST_CASE("percentile interpolates linearly") {
    const std::vector<double> v{4, 1, 3, 2};
    CHECK(percentile(v, 0) == 1.0);
    CHECK(percentile(v, 100) == 4.0);
    CHECK(percentile(v, 50) == doctest::Approx(2.5));
    CHECK(percentile(v, 25) == doctest::Approx(1.75));
}

TEST_CASE("l-moments match subset enumeration") {
    const std::vector<double> v{2.0, 7.5, 1.0, 4.0, 4.0, 9.0, 3.5};
    const auto lm = l_moments(v);
    const auto ref = agb::testing::lmoments_bruteforce(v);
    CHECK(lm.l1 == doctest::Approx(ref[0]));
    CHECK(*lm.l2 == doctest::Approx(ref[1]));
    CHECK(*lm.l3 == doctest::Approx(ref[2]));
    CHECK(*lm.l4 == doctest::Approx(ref[3]));
    CHECK(*lm.skewness == doctest::Approx(ref[2] / ref[1]));
}

TEST_CASE("l-moments of short or constant samples are partly undefined") {
    const std::vector<double> two{1.0, 3.0};
    const auto lm = l_moments(two);
    CHECK(lm.l2.has_value());
    CHECK_FALSE(lm.l3.has_value());
    const std::vector<double> flat{5, 5, 5, 5};
    CHECK_FALSE(l_moments(flat).skewness.has_value());
}

TEST_CASE("cloud metrics apply the height cutoff") {
    PointCloud c;
    for (int i = 0; i < 20; ++i) {
        PointRecord p;
        p.z = i;
        p.intensity = static_cast<std::uint16_t>(10 * i);
        c.points.push_back(p);
    }
    const MetricVector m = cloud_metrics(c, "P1", SystemTag::uls_d);
    REQUIRE(m.has("Elev.maximum"));
    CHECK(*m.get("Elev.maximum") == 19.0);
    CHECK(*m.get("Elev.minimum") == 2.0);

    PointCloud low;
    low.points.resize(5);
    CHECK_THROWS_AS(cloud_metrics(low, "P1", SystemTag::uls_d), DataError);
}

TEST_CASE("metric CSV round trip keeps undefined cells") {
    MetricVector a{"P1", SystemTag::als_d, {}};
    a.add("x", 1.5);
    a.add("y", std::nullopt);
    MetricVector b{"P2", SystemTag::als_d, {}};
    b.add("x", 2.0);
    b.add("y", 3.0);
    const auto back = metrics_from_csv(metrics_to_csv({a, b}));
    REQUIRE(back.size() == 2);
    CHECK_FALSE(back[0].get("y").has_value());
    CHECK(*back[1].get("y") == 3.0);
    CHECK(parse_system("sls_fw") == SystemTag::sls_fw);
    CHECK_THROWS_AS(parse_system("tls"), ConfigError);
}
