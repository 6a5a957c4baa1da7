#include "agb/preprocess.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "agb/parallel.hpp"
#include "agb/table_io.hpp"
#include "kdtree.hpp"

namespace agb {
namespace {

struct PointKey {
    std::uint64_t x, y, z, t;
    bool operator==(const PointKey&) const = default;
};

struct PointKeyHash {
    std::size_t operator()(const PointKey& k) const {
        std::uint64_t h = k.x * 0x9e3779b97f4a7c15ULL;
        h ^= k.y + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h ^= k.z + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h ^= k.t + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return static_cast<std::size_t>(h);
    }
};

std::uint64_t bits_of(double v) { return std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v); }

// Raster of per-cell values with missing cells, filled from the nearest
// populated cell by breadth-first search over 8-connected neighbours.
void fill_nearest(std::vector<double>& grid, std::vector<bool>& known, std::size_t ncols, std::size_t nrows) {
    std::deque<std::size_t> frontier;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (known[i]) frontier.push_back(i);
    }
    if (frontier.empty()) return;
    while (!frontier.empty()) {
        const auto i = frontier.front();
        frontier.pop_front();
        const auto col = static_cast<std::int64_t>(i % ncols);
        const auto row = static_cast<std::int64_t>(i / ncols);
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) {
                const auto c = col + dc, r = row + dr;
                if ((dr == 0 && dc == 0) || c < 0 || r < 0 || c >= static_cast<std::int64_t>(ncols) ||
                    r >= static_cast<std::int64_t>(nrows)) {
                    continue;
                }
                const auto j = static_cast<std::size_t>(r) * ncols + static_cast<std::size_t>(c);
                if (known[j]) continue;
                known[j] = true;
                grid[j] = grid[i];
                frontier.push_back(j);
            }
        }
    }
}

// Separable flat square min/max filter with a window of `width` cells (odd).
std::vector<double> morph(const std::vector<double>& grid, std::size_t ncols, std::size_t nrows, std::size_t width,
                          bool take_min) {
    const auto half = static_cast<std::int64_t>(width / 2);
    auto pick = [take_min](double a, double b) { return take_min ? std::min(a, b) : std::max(a, b); };
    std::vector<double> pass(grid.size());
    for (std::size_t r = 0; r < nrows; ++r) {
        for (std::size_t c = 0; c < ncols; ++c) {
            const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(c) - half);
            const auto hi = std::min<std::int64_t>(static_cast<std::int64_t>(ncols) - 1, static_cast<std::int64_t>(c) + half);
            double v = grid[r * ncols + static_cast<std::size_t>(lo)];
            for (auto k = lo + 1; k <= hi; ++k) v = pick(v, grid[r * ncols + static_cast<std::size_t>(k)]);
            pass[r * ncols + c] = v;
        }
    }
    std::vector<double> out(grid.size());
    for (std::size_t c = 0; c < ncols; ++c) {
        for (std::size_t r = 0; r < nrows; ++r) {
            const auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(r) - half);
            const auto hi = std::min<std::int64_t>(static_cast<std::int64_t>(nrows) - 1, static_cast<std::int64_t>(r) + half);
            double v = pass[static_cast<std::size_t>(lo) * ncols + c];
            for (auto k = lo + 1; k <= hi; ++k) v = pick(v, pass[static_cast<std::size_t>(k) * ncols + c]);
            out[r * ncols + c] = v;
        }
    }
    return out;
}

}  // namespace

PointCloud dedupe(const PointCloud& cloud) {
    PointCloud out = cloud.like();
    out.points.reserve(cloud.size());
    std::unordered_set<PointKey, PointKeyHash> seen;
    seen.reserve(cloud.size());
    for (const auto& p : cloud.points) {
        if (seen.insert({bits_of(p.x), bits_of(p.y), bits_of(p.z), bits_of(p.gps_time)}).second) {
            out.points.push_back(p);
        }
    }
    return out;
}

std::size_t count_gps_time_reversals(const PointCloud& cloud) {
    std::size_t reversals = 0;
    for (std::size_t i = 1; i < cloud.size(); ++i) {
        if (cloud.points[i].gps_time < cloud.points[i - 1].gps_time) ++reversals;
    }
    return reversals;
}

PointCloud remove_noise(const PointCloud& cloud, const NoiseFilterOptions& options) {
    if (options.neighbors == 0) throw ConfigError("noise filter needs at least one neighbour");
    if (cloud.size() <= options.neighbors) {
        throw DataError("noise filter needs more than " + std::to_string(options.neighbors) + " points, got " +
                        std::to_string(cloud.size()));
    }

    PointCloud current = cloud;
    for (std::size_t pass = 0; pass < options.max_passes; ++pass) {
        const std::size_t n = current.size();
        if (n <= options.neighbors) break;

        std::vector<std::array<double, 3>> xyz(n);
        const auto b = current.bounds();
        for (std::size_t i = 0; i < n; ++i) {
            const auto& p = current.points[i];
            xyz[i] = {p.x - b.min_x, p.y - b.min_y, p.z - b.min_z};
        }
        const detail::KdTree tree(std::move(xyz));

        std::vector<double> mean_distance(n);
        constexpr std::size_t kChunk = 4096;
        parallel_for((n + kChunk - 1) / kChunk, [&](std::size_t chunk) {
            const std::size_t end = std::min(n, (chunk + 1) * kChunk);
            for (std::size_t i = chunk * kChunk; i < end; ++i) {
                const auto d2 = tree.nearest(static_cast<std::uint32_t>(i), options.neighbors);
                double sum = 0.0;
                for (double v : d2) sum += std::sqrt(v);
                mean_distance[i] = sum / static_cast<double>(d2.size());
            }
        });

        double mean = 0.0;
        for (double d : mean_distance) mean += d;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double d : mean_distance) var += (d - mean) * (d - mean);
        const double spread = std::max(std::sqrt(var / static_cast<double>(n)), options.min_relative_spread * mean);
        const double threshold = mean + options.sigma_mult * spread;

        PointCloud kept = current.like();
        kept.points.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (mean_distance[i] <= threshold) kept.points.push_back(current.points[i]);
        }
        if (kept.size() == n) return current;
        current = std::move(kept);
    }
    return current;
}

bool GroundModel::covers(double x, double y) const {
    const double tol = 1e-9 * std::max({1.0, std::abs(origin_x), std::abs(origin_y)});
    return x >= origin_x - tol && y >= origin_y - tol && x <= origin_x + static_cast<double>(ncols) * cell + tol &&
           y <= origin_y + static_cast<double>(nrows) * cell + tol;
}

double GroundModel::elevation(double x, double y) const {
    if (!covers(x, y)) {
        std::ostringstream msg;
        msg << "point (" << x << ", " << y << ") outside ground model extent";
        throw DataError(msg.str());
    }
    auto locate = [this](double coord, double origin, std::size_t count, std::size_t& lo, double& frac) {
        double u = (coord - origin) / cell - 0.5;
        u = std::clamp(u, 0.0, static_cast<double>(count - 1));
        lo = std::min(static_cast<std::size_t>(u), count > 1 ? count - 2 : 0);
        frac = count > 1 ? u - static_cast<double>(lo) : 0.0;
    };
    std::size_t c0, r0;
    double fx, fy;
    locate(x, origin_x, ncols, c0, fx);
    locate(y, origin_y, nrows, r0, fy);
    const std::size_t c1 = ncols > 1 ? c0 + 1 : c0;
    const std::size_t r1 = nrows > 1 ? r0 + 1 : r0;
    const double bottom = value(c0, r0) * (1 - fx) + value(c1, r0) * fx;
    const double top = value(c0, r1) * (1 - fx) + value(c1, r1) * fx;
    return bottom * (1 - fy) + top * fy;
}

GroundClassification classify_ground(const PointCloud& cloud, const GroundFilterOptions& options) {
    if (!(options.cell > 0.0)) throw ConfigError("ground cell size must be positive");
    if (cloud.empty()) throw DataError("no candidate ground points: empty cloud");

    const Bounds b = cloud.bounds();
    const double cell = options.cell;
    GroundModel model;
    model.origin_x = b.min_x;
    model.origin_y = b.min_y;
    model.cell = cell;
    model.ncols = static_cast<std::size_t>(std::floor((b.max_x - b.min_x) / cell)) + 1;
    model.nrows = static_cast<std::size_t>(std::floor((b.max_y - b.min_y) / cell)) + 1;
    const std::size_t ncols = model.ncols, nrows = model.nrows, cells = ncols * nrows;

    std::vector<std::size_t> cell_of(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const auto& p = cloud.points[i];
        const auto c = std::min(ncols - 1, static_cast<std::size_t>((p.x - b.min_x) / cell));
        const auto r = std::min(nrows - 1, static_cast<std::size_t>((p.y - b.min_y) / cell));
        cell_of[i] = r * ncols + c;
    }

    std::vector<bool> candidate(cloud.size(), true);
    for (std::size_t width = 3; static_cast<double>(width) * cell <= options.max_window + 1e-9; width += 2) {
        std::vector<double> surface(cells, std::numeric_limits<double>::infinity());
        std::vector<bool> known(cells, false);
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (!candidate[i]) continue;
            surface[cell_of[i]] = std::min(surface[cell_of[i]], cloud.points[i].z);
            known[cell_of[i]] = true;
        }
        fill_nearest(surface, known, ncols, nrows);
        const auto opened = morph(morph(surface, ncols, nrows, width, true), ncols, nrows, width, false);

        const double half_width = static_cast<double>(width - 1) / 2.0 * cell;
        const double threshold =
            std::min(options.max_distance, options.initial_distance + options.slope * half_width);
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (candidate[i] && cloud.points[i].z - opened[cell_of[i]] > threshold) candidate[i] = false;
        }
    }

    GroundClassification result;
    result.cloud = cloud;
    std::vector<double> sum(cells, 0.0);
    std::vector<std::size_t> count(cells, 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        auto& p = result.cloud.points[i];
        if (candidate[i]) {
            p.classification = kClassGround;
            sum[cell_of[i]] += p.z;
            ++count[cell_of[i]];
            ++result.ground_points;
        } else if (p.classification == kClassGround) {
            p.classification = 1;
        }
    }
    if (result.ground_points == 0) throw DataError("no candidate ground points");

    model.values.assign(cells, 0.0);
    std::vector<bool> known(cells, false);
    for (std::size_t i = 0; i < cells; ++i) {
        if (count[i]) {
            model.values[i] = sum[i] / static_cast<double>(count[i]);
            known[i] = true;
        }
    }
    fill_nearest(model.values, known, ncols, nrows);
    result.model = std::move(model);
    return result;
}

PointCloud normalize_heights(const PointCloud& cloud, const GroundModel& ground, double floor) {
    PointCloud out = cloud;
    for (auto& p : out.points) {
        p.z = std::max(floor, p.z - ground.elevation(p.x, p.y));
    }
    return out;
}

void write_ground_model(const std::filesystem::path& path, const GroundModel& model) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "ncols " << model.ncols << '\n'
        << "nrows " << model.nrows << '\n'
        << "origin " << format_number(model.origin_x) << ' ' << format_number(model.origin_y) << '\n'
        << "cell " << format_number(model.cell) << '\n';
    for (std::size_t r = 0; r < model.nrows; ++r) {
        for (std::size_t c = 0; c < model.ncols; ++c) {
            if (c) out << ' ';
            out << format_number(model.value(c, r));
        }
        out << '\n';
    }
}

GroundModel read_ground_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    GroundModel model;
    std::string key;
    in >> key >> model.ncols;
    if (key != "ncols") throw DataError(path.string() + ": expected ncols");
    in >> key >> model.nrows;
    if (key != "nrows") throw DataError(path.string() + ": expected nrows");
    in >> key >> model.origin_x >> model.origin_y;
    if (key != "origin") throw DataError(path.string() + ": expected origin");
    in >> key >> model.cell;
    if (key != "cell") throw DataError(path.string() + ": expected cell");
    if (!in || model.ncols == 0 || model.nrows == 0 || !(model.cell > 0.0)) {
        throw DataError(path.string() + ": malformed ground raster header");
    }
    model.values.resize(model.ncols * model.nrows);
    for (auto& v : model.values) {
        if (!(in >> v) || !std::isfinite(v)) throw DataError(path.string() + ": truncated ground raster");
    }
    return model;
}

}  // namespace agb
