#include <doctest.h>

#include <fstream>

#include "agb/pipeline.hpp"
#include "support.hpp"

using namespace agb;
using namespace agb::testing;

TEST_CASE("stage names round trip") {
    for (Stage s : kAllStages) CHECK(parse_stage(to_string(s)) == s);
    CHECK_THROWS_AS(parse_stage("deploy"), ConfigError);
}

TEST_CASE("footprint centres") {
    const Polygon p = Polygon::rectangle(0, 0, 20, 50);
    const auto one = footprint_centres(p, 0.0);
    REQUIRE(one.size() == 1);
    CHECK(one[0].x == doctest::Approx(10.0));
    CHECK(one[0].y == doctest::Approx(25.0));
    const auto grid = footprint_centres(p, 10.0);
    CHECK(grid.size() > 1);
    for (const auto& c : grid) CHECK(p.contains(c.x, c.y));
    CHECK(plot_areas({{"A", p}}).at("A") == doctest::Approx(1000.0));
}

TEST_CASE("config loading resolves paths and rejects bad values") {
    const auto dir = scratch_dir("cfg");
    const auto data = write_analog_dataset(dir, 5.0);
    const PipelineConfig c = load_config(data.config);
    CHECK(c.plots == dir / "plots.csv");
    REQUIRE(c.systems.size() == 3);
    CHECK(c.systems[0].thin_density == 12.0);
    CHECK(c.systems[2].waveform());
    CHECK_NOTHROW(c.validate());

    {
        std::ofstream(dir / "bad.ini") << "[data]\nplots = nowhere.csv\ninventory = trees.csv\nsystems = ALS_D\n"
                                       << "[ALS_D]\nclouds = dense.las\n";
    }
    CHECK_THROWS_AS(load_config(dir / "bad.ini").validate(), ConfigError);
    {
        std::ofstream(dir / "bad2.ini") << "[data]\nplots = plots.csv\ninventory = trees.csv\nsystems = TLS\n";
    }
    CHECK_THROWS_AS(load_config(dir / "bad2.ini"), ConfigError);
}

TEST_CASE("stopping early keeps earlier artifacts only") {
    const auto dir = scratch_dir("pipe_stop");
    const auto data = write_analog_dataset(dir, 5.0);
    const PipelineConfig c = load_config(data.config);
    const auto result = run_pipeline(c, Stage::metrics);
    CHECK(result.last_stage == Stage::metrics);
    CHECK(fs::exists(data.output / "metrics" / "ULS_D.csv"));
    CHECK_FALSE(fs::exists(data.output / "features"));
}

TEST_CASE("stage failures name the stage") {
    const auto dir = scratch_dir("pipe_fail");
    const auto data = write_analog_dataset(dir, 5.0);
    {
        std::ofstream(dir / "trees.csv") << "plot_id,species,dbh_cm,height_m\nP01,x,2,5\n";
    }
    try {
        run_pipeline(load_config(data.config));
        FAIL("expected failure");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("stage inventory") != std::string::npos);
    }
}
