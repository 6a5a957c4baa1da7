#include "agb/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "agb/error.hpp"
#include "agb/table_io.hpp"

namespace agb {
namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p, double tolerance) {
    const double length = std::hypot(b.x - a.x, b.y - a.y);
    if (std::abs(cross(a, b, p)) > tolerance * std::max(length, 1.0)) return false;
    return p.x >= std::min(a.x, b.x) - tolerance && p.x <= std::max(a.x, b.x) + tolerance &&
           p.y >= std::min(a.y, b.y) - tolerance && p.y <= std::max(a.y, b.y) + tolerance;
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double tolerance) {
    const double d1 = cross(c, d, a);
    const double d2 = cross(c, d, b);
    const double d3 = cross(a, b, c);
    const double d4 = cross(a, b, d);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
        return true;
    }
    return on_segment(c, d, a, tolerance) || on_segment(c, d, b, tolerance) ||
           on_segment(a, b, c, tolerance) || on_segment(a, b, d, tolerance);
}

}  // namespace

Polygon::Polygon(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() >= 2) {
        const auto& f = vertices_.front();
        const auto& l = vertices_.back();
        if (f.x == l.x && f.y == l.y) vertices_.pop_back();
    }
    if (vertices_.size() < 3) throw DataError("polygon needs at least 3 vertices");
    for (const auto& v : vertices_) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw DataError("polygon vertex not finite");
    }

    min_x_ = max_x_ = vertices_[0].x;
    min_y_ = max_y_ = vertices_[0].y;
    for (const auto& v : vertices_) {
        min_x_ = std::min(min_x_, v.x);
        max_x_ = std::max(max_x_, v.x);
        min_y_ = std::min(min_y_, v.y);
        max_y_ = std::max(max_y_, v.y);
    }
    const double extent = std::max({max_x_ - min_x_, max_y_ - min_y_, 1.0});
    const double magnitude =
        std::max({std::abs(min_x_), std::abs(max_x_), std::abs(min_y_), std::abs(max_y_), 1.0});
    tolerance_ = 1e-12 * magnitude;

    if (std::abs(area()) <= 1e-12 * extent * extent) throw DataError("degenerate polygon: zero area");

    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = vertices_[i];
        const Vec2& b = vertices_[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            // Adjacent edges share a vertex by construction.
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_intersect(a, b, vertices_[j], vertices_[(j + 1) % n], tolerance_)) {
                throw DataError("degenerate polygon: self-intersecting");
            }
        }
    }
}

Polygon Polygon::rectangle(double min_x, double min_y, double max_x, double max_y) {
    return Polygon({{min_x, min_y}, {max_x, min_y}, {max_x, max_y}, {min_x, max_y}});
}

bool Polygon::contains(double x, double y) const {
    if (x < min_x_ - tolerance_ || x > max_x_ + tolerance_ || y < min_y_ - tolerance_ ||
        y > max_y_ + tolerance_) {
        return false;
    }
    const Vec2 p{x, y};
    const std::size_t n = vertices_.size();
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = vertices_[i];
        const Vec2& b = vertices_[j];
        if (on_segment(a, b, p, tolerance_)) return true;
        if ((a.y > y) != (b.y > y)) {
            const double x_cross = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (x < x_cross) inside = !inside;
        }
    }
    return inside;
}

double Polygon::area() const {
    double twice = 0.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = vertices_[i];
        const Vec2& b = vertices_[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    return std::abs(twice) / 2.0;
}

Vec2 Polygon::centroid() const {
    // Shifted to the first vertex to keep large projected coordinates well conditioned.
    const Vec2 o = vertices_[0];
    double twice = 0.0, cx = 0.0, cy = 0.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double ax = vertices_[i].x - o.x, ay = vertices_[i].y - o.y;
        const double bx = vertices_[(i + 1) % n].x - o.x, by = vertices_[(i + 1) % n].y - o.y;
        const double c = ax * by - bx * ay;
        twice += c;
        cx += (ax + bx) * c;
        cy += (ay + by) * c;
    }
    return {o.x + cx / (3.0 * twice), o.y + cy / (3.0 * twice)};
}

std::map<std::string, Polygon> read_plots(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const auto id_col = table.require_column("plot_id");
    const auto x_col = table.require_column("x");
    const auto y_col = table.require_column("y");

    std::map<std::string, std::vector<Vec2>> rings;
    std::vector<std::string> order;
    for (const auto& row : table.rows) {
        const std::string& id = row[id_col];
        if (!rings.contains(id)) order.push_back(id);
        rings[id].push_back({parse_required(row[x_col], "x"), parse_required(row[y_col], "y")});
    }
    std::map<std::string, Polygon> plots;
    for (const auto& id : order) {
        try {
            plots.emplace(id, Polygon(rings[id]));
        } catch (const DataError& e) {
            throw DataError("plot " + id + ": " + e.what());
        }
    }
    return plots;
}

void write_plots(const std::filesystem::path& path, const std::map<std::string, Polygon>& plots) {
    CsvTable table;
    table.header = {"plot_id", "x", "y"};
    for (const auto& [id, polygon] : plots) {
        for (const auto& v : polygon.vertices()) {
            table.rows.push_back({id, format_number(v.x), format_number(v.y)});
        }
    }
    write_csv(path, table);
}

}  // namespace agb
