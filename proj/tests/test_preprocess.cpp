#include <doctest.h>

#include "agb/discrete_metrics.hpp"
#include "agb/preprocess.hpp"
#include "support.hpp"

using namespace agb;
using namespace agb::testing;

TEST_CASE("dedupe keeps the first copy") {
    PointCloud c;
    c.points = {{1, 2, 3, 10}, {1, 2, 3, 20}, {1, 2, 3, 10}};
    c.points[0].gps_time = 5.0;
    c.points[2].gps_time = 5.0;
    const PointCloud d = dedupe(c);
    REQUIRE(d.size() == 2);
    CHECK(d.points[0].intensity == 10);
    CHECK(count_gps_time_reversals(c) == 1);
}

TEST_CASE("noise filter removes an isolated point and is idempotent") {
    PointCloud c = layered_scene(0.0, 0.0, 1, 50.0, 5.0, 0.5);
    const std::size_t n = c.size();
    PointRecord spike;
    spike.z = 200.0;
    c.points.push_back(spike);
    const PointCloud once = remove_noise(c);
    CHECK(once.size() == n);
    CHECK(remove_noise(once).size() == once.size());
}

TEST_CASE("ground filter on a sloped scene with canopy") {
    SceneSpec spec;
    spec.width = 30.0;
    spec.length = 30.0;
    spec.slope_x = 0.1;
    spec.slope_y = -0.05;
    spec.point_density = 15.0;
    spec.seed = 4;
    const Scene scene = generate_scene(spec);
    const auto g = classify_ground(scene.cloud);
    CHECK(g.ground_points > 0);
    double worst = 0.0;
    for (double y = 3; y < 27; y += 2)
        for (double x = 3; x < 27; x += 2) worst = std::max(worst, std::abs(g.model.elevation(x, y) - spec.ground_at(x, y)));
    CHECK(worst < 0.5);

    const PointCloud norm = normalize_heights(g.cloud, g.model);
    for (const auto& p : norm.points) CHECK(p.z >= kDefaultHeightFloor);
    CHECK_THROWS_AS(g.model.elevation(-1000.0, 0.0), DataError);
}

TEST_CASE("ground model file round trip") {
    GroundModel m;
    m.origin_x = 10.0;
    m.origin_y = 20.0;
    m.cell = 2.0;
    m.ncols = 3;
    m.nrows = 2;
    m.values = {1, 2, 3, 4, 5, 6.125};
    const auto dir = scratch_dir("dtm");
    write_ground_model(dir / "g.dtm", m);
    const GroundModel back = read_ground_model(dir / "g.dtm");
    CHECK(back.values == m.values);
    CHECK(back.ncols == 3);
    CHECK(back.elevation(13.0, 21.0) == doctest::Approx(2.0));
    CHECK(back.elevation(12.0, 22.0) == doctest::Approx(3.0));
}
