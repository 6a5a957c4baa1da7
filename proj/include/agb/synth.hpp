#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "agb/allometry.hpp"
#include "agb/geometry.hpp"
#include "agb/las_io.hpp"

namespace agb {

struct SceneSpec {
    std::string plot_id = "P01";
    double origin_x = 0.0;  // plot south-west corner
    double origin_y = 0.0;
    double width = 20.0;    // m, east-west
    double length = 50.0;   // m, north-south
    double buffer = 0.0;    // trees and points also fill this margin; only plot stems are inventoried
    double stem_density = 1000.0;  // trees/ha
    double height_min = 10.0;
    double height_max = 20.0;
    // Heights are min + (max - min) u^skew for uniform u; 1 is uniform.
    double height_skew = 1.0;
    double crown_ratio = 0.25;  // crown radius / tree height
    double crown_depth = 0.5;   // paraboloid depth / tree height
    double ground_z = 100.0;    // at the plot origin
    double slope_x = 0.0;       // dz/dx
    double slope_y = 0.0;
    double point_density = 50.0;  // pulses per m2
    double second_return_probability = 0.5;
    double wood_density = kDefaultWoodDensity;
    std::string species = "synthetic";
    std::uint64_t seed = 123;

    // Throws ConfigError for non-positive sizes or densities.
    void validate() const;
    Polygon plot() const;
    double ground_at(double x, double y) const;
};

// DBH in cm from height in m.
inline constexpr double kDbhCoefficient = 1.3;
inline constexpr double kDbhExponent = 1.1;
double synthetic_dbh(double height);

struct SyntheticTree {
    double x = 0.0;
    double y = 0.0;
    TreeRecord record;
    bool in_plot = true;
};

struct Scene {
    SceneSpec spec;
    PointCloud cloud;
    std::vector<SyntheticTree> trees;  // all stems, buffer included
    PlotInventory inventory;           // stems inside the plot
};

// Ray-cast pulses onto paraboloid crowns over a planar ground; every crown
// apex is also recorded. Throws DataError when crowns would overlap more than
// the cap (summed crown area / scene area > 8).
Scene generate_scene(const SceneSpec& spec);

// Keeps whole pulses (returns sharing a GPS time) so that roughly
// target_density pulses per m2 of `area` remain.
PointCloud thin_pulses(const PointCloud& cloud, double target_density, double area, std::uint64_t seed);

// [scene] section of an INI file; keys mirror the SceneSpec field names.
SceneSpec read_scene_spec(const std::filesystem::path& path);

// plot_id, species, dbh_cm, height_m, rho, x, y (plot stems only)
void write_truth(const std::filesystem::path& path, const std::vector<Scene>& scenes);

}  // namespace agb
