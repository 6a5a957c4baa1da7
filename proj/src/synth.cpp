#include "agb/synth.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <map>
#include <numbers>

#include "agb/error.hpp"
#include "agb/random.hpp"

namespace agb {
namespace {

constexpr double kOverlapCap = 8.0;
constexpr double kBucket = 2.0;

struct CrownIndex {
    double min_x = 0.0, min_y = 0.0;
    std::size_t ncols = 0, nrows = 0;
    std::vector<std::vector<std::size_t>> cells;

    CrownIndex(const std::vector<SyntheticTree>& trees, double crown_ratio, double x0, double y0, double x1,
               double y1)
        : min_x(x0), min_y(y0) {
        ncols = static_cast<std::size_t>(std::ceil((x1 - x0) / kBucket)) + 1;
        nrows = static_cast<std::size_t>(std::ceil((y1 - y0) / kBucket)) + 1;
        cells.resize(ncols * nrows);
        for (std::size_t t = 0; t < trees.size(); ++t) {
            const double r = crown_ratio * trees[t].record.height;
            const auto c0 = clamp_col(trees[t].x - r), c1 = clamp_col(trees[t].x + r);
            const auto r0 = clamp_row(trees[t].y - r), r1 = clamp_row(trees[t].y + r);
            for (auto row = r0; row <= r1; ++row) {
                for (auto col = c0; col <= c1; ++col) cells[row * ncols + col].push_back(t);
            }
        }
    }

    std::size_t clamp_col(double x) const {
        const double c = std::floor((x - min_x) / kBucket);
        return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(ncols - 1)));
    }
    std::size_t clamp_row(double y) const {
        const double r = std::floor((y - min_y) / kBucket);
        return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(nrows - 1)));
    }
    const std::vector<std::size_t>& at(double x, double y) const { return cells[clamp_row(y) * ncols + clamp_col(x)]; }
};

}  // namespace

void SceneSpec::validate() const {
    if (!(width > 0.0) || !(length > 0.0)) throw ConfigError("scene dimensions must be positive");
    if (!(buffer >= 0.0)) throw ConfigError("scene buffer must be non-negative");
    if (!(stem_density >= 0.0)) throw ConfigError("stem density must be non-negative");
    if (!(height_min > 0.0) || !(height_max >= height_min)) throw ConfigError("height range must satisfy 0 < min <= max");
    if (!(height_skew > 0.0)) throw ConfigError("height skew must be positive");
    if (!(crown_ratio > 0.0) || !(crown_depth > 0.0)) throw ConfigError("crown ratio and depth must be positive");
    if (!(point_density > 0.0)) throw ConfigError("point density must be positive");
    if (!(second_return_probability >= 0.0 && second_return_probability <= 1.0)) {
        throw ConfigError("second return probability must lie in [0, 1]");
    }
}

Polygon SceneSpec::plot() const { return Polygon::rectangle(origin_x, origin_y, origin_x + width, origin_y + length); }

double SceneSpec::ground_at(double x, double y) const {
    return ground_z + slope_x * (x - origin_x) + slope_y * (y - origin_y);
}

double synthetic_dbh(double height) { return kDbhCoefficient * std::pow(height, kDbhExponent); }

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    Scene scene;
    scene.spec = spec;
    scene.inventory.plot_id = spec.plot_id;
    scene.inventory.area = spec.width * spec.length;

    const double x0 = spec.origin_x - spec.buffer, y0 = spec.origin_y - spec.buffer;
    const double x1 = spec.origin_x + spec.width + spec.buffer, y1 = spec.origin_y + spec.length + spec.buffer;
    const double area = (x1 - x0) * (y1 - y0);

    Rng stems(derive_seed(spec.seed, 0));
    const auto count = static_cast<std::size_t>(std::llround(spec.stem_density * area / 10000.0));
    const Polygon plot = spec.plot();
    double crown_area = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        SyntheticTree tree;
        tree.x = stems.uniform(x0, x1);
        tree.y = stems.uniform(y0, y1);
        const double u = stems.uniform();
        tree.record.plot_id = spec.plot_id;
        tree.record.species = spec.species;
        tree.record.wood_density = spec.wood_density;
        tree.record.height = spec.height_min + (spec.height_max - spec.height_min) * std::pow(u, spec.height_skew);
        tree.record.dbh = synthetic_dbh(tree.record.height);
        tree.in_plot = plot.contains(tree.x, tree.y);
        const double r = spec.crown_ratio * tree.record.height;
        crown_area += std::numbers::pi * r * r;
        scene.trees.push_back(tree);
    }
    if (crown_area / area > kOverlapCap) {
        throw DataError("scene " + spec.plot_id + ": crown cover " + format_number(crown_area / area) +
                        " exceeds the overlap cap of " + format_number(kOverlapCap));
    }
    for (const auto& t : scene.trees) {
        if (!t.in_plot) continue;
        t.record.validate();
        scene.inventory.trees.push_back(t.record);
    }

    const CrownIndex index(scene.trees, spec.crown_ratio, x0, y0, x1, y1);
    Rng pulses(derive_seed(spec.seed, 1));
    const auto pulse_count = static_cast<std::size_t>(std::llround(spec.point_density * area));
    auto& points = scene.cloud.points;
    points.reserve(pulse_count * 3 / 2 + scene.trees.size());
    double time = 0.0;
    for (std::size_t p = 0; p < pulse_count; ++p) {
        const double x = pulses.uniform(x0, x1), y = pulses.uniform(y0, y1);
        const double ground = spec.ground_at(x, y);
        double top = -std::numeric_limits<double>::infinity();
        for (auto t : index.at(x, y)) {
            const auto& tree = scene.trees[t];
            const double h = tree.record.height;
            const double r = spec.crown_ratio * h;
            const double d2 = (x - tree.x) * (x - tree.x) + (y - tree.y) * (y - tree.y);
            if (d2 > r * r) continue;
            top = std::max(top, spec.ground_at(tree.x, tree.y) + h - spec.crown_depth * h * d2 / (r * r));
        }
        const double second = pulses.uniform();
        const double shade = pulses.uniform();
        time += 1e-5;
        if (std::isfinite(top)) {
            const bool two = second < spec.second_return_probability;
            PointRecord c{x, y, top, static_cast<std::uint16_t>(20 + 40 * shade), 1, two ? std::uint8_t{2} : std::uint8_t{1}, 1, time};
            points.push_back(c);
            if (two) points.push_back({x, y, ground, static_cast<std::uint16_t>(60 + 40 * shade), 2, 2, kClassGround, time});
        } else {
            points.push_back({x, y, ground, static_cast<std::uint16_t>(80 + 40 * shade), 1, 1, kClassGround, time});
        }
    }
    for (const auto& tree : scene.trees) {
        time += 1e-5;
        points.push_back({tree.x, tree.y, spec.ground_at(tree.x, tree.y) + tree.record.height, 40, 1, 1, 1, time});
    }
    scene.cloud.crs_label = "synthetic local metres";
    scene.cloud.offset = {std::floor(x0), std::floor(y0), std::floor(spec.ground_z)};
    return scene;
}

PointCloud thin_pulses(const PointCloud& cloud, double target_density, double area, std::uint64_t seed) {
    if (!(target_density > 0.0) || !(area > 0.0)) throw ConfigError("thinning needs a positive density and area");
    std::map<double, bool> keep;
    for (const auto& p : cloud.points) keep.emplace(p.gps_time, false);
    const double fraction = std::min(1.0, target_density * area / static_cast<double>(keep.size()));
    Rng rng(seed);
    for (auto& [time, k] : keep) k = rng.uniform() < fraction;
    PointCloud out = cloud.like();
    for (const auto& p : cloud.points) {
        if (keep[p.gps_time]) out.points.push_back(p);
    }
    return out;
}

SceneSpec read_scene_spec(const std::filesystem::path& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ptree_error& e) {
        throw ConfigError("cannot read scene spec " + path.string() + ": " + e.what());
    }
    SceneSpec s;
    try {
        const auto& t = tree.get_child("scene");
        s.plot_id = t.get("plot_id", s.plot_id);
        s.origin_x = t.get("origin_x", s.origin_x);
        s.origin_y = t.get("origin_y", s.origin_y);
        s.width = t.get("width", s.width);
        s.length = t.get("length", s.length);
        s.buffer = t.get("buffer", s.buffer);
        s.stem_density = t.get("stem_density", s.stem_density);
        s.height_min = t.get("height_min", s.height_min);
        s.height_max = t.get("height_max", s.height_max);
        s.height_skew = t.get("height_skew", s.height_skew);
        s.crown_ratio = t.get("crown_ratio", s.crown_ratio);
        s.crown_depth = t.get("crown_depth", s.crown_depth);
        s.ground_z = t.get("ground_z", s.ground_z);
        s.slope_x = t.get("slope_x", s.slope_x);
        s.slope_y = t.get("slope_y", s.slope_y);
        s.point_density = t.get("point_density", s.point_density);
        s.second_return_probability = t.get("second_return_probability", s.second_return_probability);
        s.wood_density = t.get("wood_density", s.wood_density);
        s.species = t.get("species", s.species);
        s.seed = t.get("seed", s.seed);
    } catch (const boost::property_tree::ptree_error& e) {
        throw ConfigError("bad scene spec " + path.string() + ": " + e.what());
    }
    s.validate();
    return s;
}

void write_truth(const std::filesystem::path& path, const std::vector<Scene>& scenes) {
    CsvTable table;
    table.header = {"plot_id", "species", "dbh_cm", "height_m", "rho", "x", "y"};
    for (const auto& scene : scenes) {
        for (const auto& t : scene.trees) {
            if (!t.in_plot) continue;
            table.rows.push_back({t.record.plot_id, t.record.species, format_number(t.record.dbh),
                                  format_number(t.record.height), format_number(t.record.wood_density),
                                  format_number(t.x), format_number(t.y)});
        }
    }
    write_csv(path, table);
}

}  // namespace agb
