#include <doctest.h>

#include <fstream>
#include <set>

#include "agb/synth.hpp"
#include "support.hpp"

using namespace agb;
using namespace agb::testing;

TEST_CASE("scene generation is seeded and inventories plot stems only") {
    SceneSpec spec;
    spec.buffer = 10.0;
    spec.point_density = 10.0;
    spec.seed = 77;
    const Scene a = generate_scene(spec);
    const Scene b = generate_scene(spec);
    REQUIRE(a.cloud.size() == b.cloud.size());
    CHECK(a.cloud.points.back().z == b.cloud.points.back().z);

    const Polygon plot = spec.plot();
    std::size_t inside = 0;
    for (const auto& t : a.trees) {
        CHECK(t.in_plot == plot.contains(t.x, t.y));
        inside += t.in_plot;
        CHECK(t.record.height >= spec.height_min);
        CHECK(t.record.height <= spec.height_max);
        CHECK(t.record.dbh == doctest::Approx(synthetic_dbh(t.record.height)));
    }
    CHECK(a.inventory.trees.size() == inside);
    CHECK(a.inventory.area == doctest::Approx(1000.0));

    spec.seed = 78;
    CHECK(generate_scene(spec).cloud.size() != a.cloud.size());
}

TEST_CASE("ground points lie on the plane") {
    SceneSpec spec;
    spec.slope_x = 0.2;
    spec.point_density = 5.0;
    const Scene s = generate_scene(spec);
    for (const auto& p : s.cloud.points) {
        if (p.classification == kClassGround) CHECK(p.z == doctest::Approx(spec.ground_at(p.x, p.y)));
        else CHECK(p.z > spec.ground_at(p.x, p.y));
    }
}

TEST_CASE("invalid specs and crowded scenes fail") {
    SceneSpec spec;
    spec.width = 0.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    SceneSpec crowded;
    crowded.stem_density = 1e5;
    crowded.height_min = 30.0;
    crowded.height_max = 40.0;
    CHECK_THROWS_AS(generate_scene(crowded), DataError);
}

TEST_CASE("thinning keeps whole pulses") {
    SceneSpec spec;
    spec.point_density = 40.0;
    const Scene s = generate_scene(spec);
    const PointCloud thin = thin_pulses(s.cloud, 10.0, 1000.0, 1);
    std::set<double> pulses;
    for (const auto& p : thin.points) pulses.insert(p.gps_time);
    CHECK(static_cast<double>(pulses.size()) == doctest::Approx(10000.0).epsilon(0.1));
    std::size_t full = 0;
    for (const auto& p : s.cloud.points) full += pulses.count(p.gps_time);
    CHECK(full == thin.size());
}

TEST_CASE("scene spec from INI") {
    const auto dir = scratch_dir("spec");
    {
        std::ofstream(dir / "s.ini") << "[scene]\nplot_id = Q7\nstem_density = 600\nheight_max = 25\nseed = 9\n";
    }
    const SceneSpec s = read_scene_spec(dir / "s.ini");
    CHECK(s.plot_id == "Q7");
    CHECK(s.stem_density == 600.0);
    CHECK(s.height_max == 25.0);
    CHECK(s.seed == 9);
    CHECK(s.width == 20.0);
    {
        std::ofstream(dir / "bad.ini") << "[scene]\nwidth = -3\n";
    }
    CHECK_THROWS_AS(read_scene_spec(dir / "bad.ini"), ConfigError);
}
