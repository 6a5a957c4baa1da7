#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "agb/geometry.hpp"
#include "agb/las_io.hpp"
#include "agb/random.hpp"
#include "agb/synth.hpp"

namespace agb::testing {

namespace fs = std::filesystem;

inline fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("agb_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Flat ground at `ground_z` on a regular grid; points within `canopy_fraction`
// of the cells (chosen at random) are a canopy return at ground_z + height
// instead of a ground return.
inline PointCloud layered_scene(double canopy_fraction, double height, std::uint64_t seed, double ground_z = 50.0,
                                double half_extent = 20.0, double spacing = 0.25) {
    PointCloud cloud;
    Rng rng(seed);
    double t = 0.0;
    for (double y = -half_extent; y <= half_extent; y += spacing) {
        for (double x = -half_extent; x <= half_extent; x += spacing) {
            PointRecord p;
            p.x = x;
            p.y = y;
            p.gps_time = (t += 1.0);
            if (rng.uniform() < canopy_fraction) {
                p.z = ground_z + height;
                p.classification = 1;
            } else {
                p.z = ground_z;
                p.classification = kClassGround;
            }
            cloud.points.push_back(p);
        }
    }
    return cloud;
}

// Ten plots from young (about 8 m, 890 stems/ha) to mature (about 20 m,
// 1450 stems/ha) stands, laid out along x with a buffer of trees around each.
inline std::vector<SceneSpec> analog_specs(double point_density) {
    std::vector<SceneSpec> specs;
    for (int i = 0; i < 10; ++i) {
        const double t = i / 9.0;
        SceneSpec s;
        s.plot_id = (i < 9 ? "P0" : "P") + std::to_string(i + 1);
        s.origin_x = 1000.0 + 200.0 * i;
        s.origin_y = 5000.0;
        s.buffer = 20.0;
        s.stem_density = 890.0 + 560.0 * t;
        s.height_min = 5.0 - 1.0 * t;
        s.height_max = 8.0 + 12.0 * t;
        s.height_skew = 1.0 + 2.0 * t;
        s.ground_z = 200.0 + 15.0 * i;
        s.slope_x = 0.01 * (i % 4);
        s.slope_y = -0.02 * (i % 3);
        s.point_density = point_density;
        s.seed = derive_seed(123, 500 + static_cast<std::uint64_t>(i));
        specs.push_back(s);
    }
    return specs;
}

struct AnalogDataset {
    fs::path config;
    fs::path output;
};

// Writes the dense cloud, plots, trees and a three-system pipeline config:
// ULS_D is the dense cloud, ALS_D its 12 pulses/m2 thinning and SLS_FW
// waveforms simulated from the dense cloud.
inline AnalogDataset write_analog_dataset(const fs::path& dir, double point_density = 30.0,
                                          const std::string& extra_config = "") {
    std::vector<Scene> scenes;
    std::vector<PointCloud> clouds;
    std::map<std::string, Polygon> plots;
    for (const auto& spec : analog_specs(point_density)) {
        scenes.push_back(generate_scene(spec));
        clouds.push_back(scenes.back().cloud);
        plots[spec.plot_id] = spec.plot();
    }
    PointCloud dense = merge(clouds);
    dense.offset = {1000.0, 5000.0, 200.0};
    write_las(dense, dir / "dense.las");
    write_plots(dir / "plots.csv", plots);
    write_truth(dir / "trees.csv", scenes);

    AnalogDataset d{dir / "pipeline.ini", dir / "out"};
    std::ofstream cfg(d.config);
    cfg << "[general]\nseed = 123\noutput = out\n\n"
        << "[data]\nplots = plots.csv\ninventory = trees.csv\nsystems = ALS_D, ULS_D, SLS_FW\n\n"
        << "[ALS_D]\nclouds = dense.las\nthin_density = 12\n\n"
        << "[ULS_D]\nclouds = dense.las\n\n"
        << "[SLS_FW]\nclouds = dense.las\n\n"
        << extra_config;
    return d;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace agb::testing
