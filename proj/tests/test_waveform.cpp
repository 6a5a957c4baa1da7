#include <doctest.h>

#include <cmath>

#include "agb/waveform.hpp"
#include "support.hpp"

using namespace agb;
using namespace agb::testing;

TEST_CASE("footprint weights fall off with distance") {
    FootprintConfig fc;
    PointRecord centre, edge, far;
    edge.x = fc.sigma();
    far.x = 4.0 * fc.sigma();
    centre.classification = edge.classification = far.classification = 1;
    CHECK(footprint_weight(centre, fc) == doctest::Approx(fc.rho_v));
    CHECK(footprint_weight(edge, fc) == doctest::Approx(fc.rho_v * std::exp(-0.5)));
    CHECK(footprint_weight(far, fc) == 0.0);
}

TEST_CASE("invalid footprint settings are rejected") {
    FootprintConfig fc;
    fc.bin = 0.0;
    CHECK_THROWS_AS(fc.validate(), ConfigError);
}

TEST_CASE("empty footprint raises a waveform error") {
    PointCloud c;
    PointRecord p;
    p.x = 1000.0;
    c.points.push_back(p);
    try {
        simulate_footprint(c, FootprintConfig{});
        FAIL("expected an error");
    } catch (const WaveformError& e) {
        CHECK(e.kind() == WaveformErrorKind::empty_footprint);
    }
}

TEST_CASE("decomposition recovers two separated layers") {
    const PointCloud c = layered_scene(0.5, 12.0, 3);
    const Waveform wf = simulate_footprint(c, FootprintConfig{});
    const auto comps = decompose(wf);
    REQUIRE(comps.size() >= 2);
    CHECK(comps.front().mean == doctest::Approx(50.0).epsilon(0.002));
    CHECK(comps.back().mean == doctest::Approx(62.0).epsilon(0.002));
    for (std::size_t i = 1; i < comps.size(); ++i) CHECK(comps[i - 1].mean <= comps[i].mean);
}

TEST_CASE("canopy without ground has no ground estimate") {
    const PointCloud c = layered_scene(1.0, 12.0, 3);
    const Waveform wf = simulate_footprint(c, FootprintConfig{});
    CHECK_THROWS_AS(find_ground(wf), WaveformError);
}

TEST_CASE("cover formula and profile helpers") {
    CHECK(cover_fraction(0.0, 1.0, 0.57, 0.4) == 0.0);
    CHECK(cover_fraction(1.0, 0.0, 0.57, 0.4) == 1.0);
    CHECK(cover_fraction(0.57, 0.4, 0.57, 0.4) == doctest::Approx(0.5));

    const std::vector<double> even{1, 1, 1, 1};
    CHECK(foliage_height_diversity(even) == doctest::Approx(std::log(4.0)));
    const std::vector<double> single{0, 3, 0};
    CHECK(foliage_height_diversity(single) == doctest::Approx(0.0));

    const std::vector<double> layers{1.0, 1.0};
    const auto lai = lai_profile(layers, 2.0);
    REQUIRE(lai.layer_lai.size() == 2);
    CHECK(lai.layer_lai[1] == doctest::Approx(-std::log(3.0 / 4.0)));
    CHECK(lai.layer_lai[0] == doctest::Approx(-std::log(2.0 / 3.0)));
    CHECK_FALSE(lai.saturated);
}

TEST_CASE("noise raises the threshold and keeps metrics finite") {
    const PointCloud c = layered_scene(0.4, 10.0, 5);
    FootprintConfig fc;
    fc.noise_sd = 0.01;
    const Waveform wf = simulate_footprint(c, fc);
    CHECK(wf.threshold > 0.0);
    const auto m = waveform_metrics(wf, c, fc);
    CHECK(m.ground.gaussian == doctest::Approx(50.0).epsilon(0.01));
    CHECK(std::isfinite(m.rh_gauss[50]));
    CHECK_FALSE(m.ancillary.blair_saturated);
}

TEST_CASE("metric vector carries RH every 5 percent and averages") {
    const PointCloud c = layered_scene(0.4, 10.0, 6);
    const FootprintConfig fc;
    const auto m = waveform_metrics(simulate_footprint(c, fc), c, fc);
    const auto v = to_metric_vector(m, "P1");
    CHECK(v.has("rhGauss.50"));
    CHECK_FALSE(v.has("rhGauss.51"));
    const auto avg = average_metrics({v, v}, "P1");
    CHECK(*avg.get("rhGauss.50") == doctest::Approx(*v.get("rhGauss.50")));
}

TEST_CASE("waveform dump round trip") {
    const PointCloud c = layered_scene(0.4, 10.0, 7);
    FootprintConfig fc;
    fc.wave_id = "P1_0";
    const Waveform wf = simulate_footprint(c, fc);
    const auto dir = scratch_dir("wf");
    write_waveform(dir / "a.wf", wf);
    const Waveform back = read_waveform(dir / "a.wf");
    CHECK(back.wave_id == "P1_0");
    REQUIRE(back.size() == wf.size());
    CHECK(back.amplitude == wf.amplitude);
    CHECK(back.top == wf.top);
    CHECK_FALSE(back.annotated());
}
