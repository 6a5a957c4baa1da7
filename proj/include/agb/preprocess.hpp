#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "agb/las_io.hpp"

namespace agb {

// Drops points whose (x, y, z, gps_time) repeats an earlier point; first wins.
PointCloud dedupe(const PointCloud& cloud);

// Number of adjacent point pairs whose GPS time decreases. A sanity signal
// only; acquisition order is not otherwise checked.
std::size_t count_gps_time_reversals(const PointCloud& cloud);

struct NoiseFilterOptions {
    std::size_t neighbors = 8;
    double sigma_mult = 3.0;
    // Lower bound on the spread used in the threshold, as a fraction of the
    // mean neighbour distance. Regular sampling has almost no spread, and
    // without a floor its border points would be cut.
    double min_relative_spread = 0.25;
    std::size_t max_passes = 50;
};

// Statistical outlier removal on the mean distance to the k nearest
// neighbours (3D). Passes repeat until no point exceeds
// mean + sigma_mult * spread, so the filter is idempotent.
PointCloud remove_noise(const PointCloud& cloud, const NoiseFilterOptions& options = {});

// Ground elevation raster. Cell (col, row) covers
// [origin_x + col*cell, origin_x + (col+1)*cell) and likewise in y; row 0 is
// the southernmost row. Values are sampled at cell centres.
struct GroundModel {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double cell = 1.0;
    std::size_t ncols = 0;
    std::size_t nrows = 0;
    std::vector<double> values;  // row-major

    double value(std::size_t col, std::size_t row) const { return values[row * ncols + col]; }
    bool covers(double x, double y) const;
    // Bilinear interpolation between cell centres; throws DataError outside the extent.
    double elevation(double x, double y) const;
};

struct GroundFilterOptions {
    double cell = 1.0;
    double max_window = 20.0;
    double slope = 0.3;
    double initial_distance = 0.3;
    double max_distance = 3.0;
};

struct GroundClassification {
    PointCloud cloud;  // classification 2 for ground, ground labels removed elsewhere
    GroundModel model;
    std::size_t ground_points = 0;
};

// Progressive morphological filter (Zhang et al. 2003) with linearly growing
// square windows of 3, 5, 7, ... cells up to max_window metres.
GroundClassification classify_ground(const PointCloud& cloud, const GroundFilterOptions& options = {});

inline constexpr double kDefaultHeightFloor = -1.0;

// z becomes height above the ground model; heights below floor are clamped.
PointCloud normalize_heights(const PointCloud& cloud, const GroundModel& ground,
                             double floor = kDefaultHeightFloor);

void write_ground_model(const std::filesystem::path& path, const GroundModel& model);
GroundModel read_ground_model(const std::filesystem::path& path);

}  // namespace agb
