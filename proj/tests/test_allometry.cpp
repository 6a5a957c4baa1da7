#include <doctest.h>

#include <cmath>
#include <fstream>

#include "agb/allometry.hpp"
#include "support.hpp"

using namespace agb;
using namespace agb::testing;

TEST_CASE("tree biomass follows the pantropical form") {
    CHECK(tree_agb(0.6, 20.0, 15.0) == doctest::Approx(0.0673 * std::pow(0.6 * 400.0 * 15.0, 0.976)));
    CHECK_THROWS_AS(tree_agb(0.0, 20.0, 15.0), DataError);
    CHECK_THROWS_AS(tree_agb(0.6, -1.0, 15.0), DataError);
}

TEST_CASE("carbon conversions") {
    CHECK(carbon(100.0) == 47.0);
    CHECK(co2e(1.0) == 3.67);
    CHECK(carbon(0.0) == 0.0);
    CHECK_THROWS_AS(carbon(-1.0), DataError);
    CHECK_THROWS_AS(co2e(-0.1), DataError);
}

TEST_CASE("tree validation bounds") {
    TreeRecord t{"P1", "x", 0.6, 10.0, 8.0};
    CHECK_NOTHROW(t.validate());
    t.dbh = 4.9;
    CHECK_THROWS_AS(t.validate(), DataError);
    t.dbh = 10.0;
    t.wood_density = 1.6;
    CHECK_THROWS_AS(t.validate(), DataError);
}

TEST_CASE("plot totals scale to per hectare") {
    PlotInventory inv{"P1", 1000.0, {{"P1", "a", 0.6, 20.0, 15.0}, {"P1", "b", 0.5, 30.0, 20.0}}};
    const PlotTotals t = plot_totals(inv);
    const double kg = tree_agb(0.6, 20.0, 15.0) + tree_agb(0.5, 30.0, 20.0);
    CHECK(t.tree_count == 2);
    CHECK(t.agb_kg == doctest::Approx(kg));
    CHECK(t.agbt == doctest::Approx(kg / 1000.0 * 10.0));
    CHECK(t.agbm == doctest::Approx(kg / 2.0));
    CHECK(t.carbon == doctest::Approx(0.47 * t.agbt));
    CHECK(t.co2e == doctest::Approx(3.67 * t.carbon));
    CHECK_THROWS_AS(plot_totals(PlotInventory{"E", 100.0, {}}), DataError);
}

TEST_CASE("tree files, density lookup and grouping") {
    const auto dir = scratch_dir("trees");
    {
        std::ofstream out(dir / "rho.csv");
        out << "species,rho\noak,0.7\n";
        std::ofstream trees(dir / "trees.csv");
        trees << "plot_id,species,dbh_cm,height_m\nP2,oak,12,9\nP1,pine,20,14\nP1,oak,8,6\n";
    }
    const auto table = read_wood_density(dir / "rho.csv");
    CHECK(table.lookup("oak") == 0.7);
    CHECK(table.lookup("unknown") == kDefaultWoodDensity);

    const auto trees = read_trees(dir / "trees.csv", table);
    REQUIRE(trees.size() == 3);
    CHECK(trees[0].wood_density == 0.7);
    CHECK(trees[1].wood_density == kDefaultWoodDensity);

    const auto plots = group_inventory(trees, {{"P1", 500.0}, {"P2", 500.0}});
    REQUIRE(plots.size() == 2);
    CHECK(plots[0].plot_id == "P1");
    CHECK(plots[0].trees.size() == 2);
    CHECK_THROWS_AS(group_inventory(trees, {{"P1", 500.0}}), DataError);

    write_trees(dir / "out.csv", trees);
    CHECK(read_trees(dir / "out.csv", WoodDensityTable(0.3)).at(1).wood_density == kDefaultWoodDensity);
}

TEST_CASE("totals CSV round trip") {
    std::vector<PlotTotals> totals{plot_totals({"P1", 400.0, {{"P1", "a", 0.6, 25.0, 18.0}}})};
    const auto back = totals_from_csv(totals_to_csv(totals));
    REQUIRE(back.size() == 1);
    CHECK(back[0].agbt == totals[0].agbt);
    CHECK(back[0].co2e == totals[0].co2e);
}
