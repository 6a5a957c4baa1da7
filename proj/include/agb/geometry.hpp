#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace agb {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Simple planar polygon in projected metres. Vertex order may be either
// orientation; the ring is implicitly closed.
class Polygon {
public:
    Polygon() = default;

    // Throws DataError for fewer than 3 vertices, zero area or self-intersection.
    explicit Polygon(std::vector<Vec2> vertices);

    static Polygon rectangle(double min_x, double min_y, double max_x, double max_y);

    const std::vector<Vec2>& vertices() const { return vertices_; }

    // Boundary points (edges and vertices) count as inside.
    bool contains(double x, double y) const;

    double area() const;
    Vec2 centroid() const;
    double min_x() const { return min_x_; }
    double min_y() const { return min_y_; }
    double max_x() const { return max_x_; }
    double max_y() const { return max_y_; }

private:
    std::vector<Vec2> vertices_;
    double min_x_ = 0.0, min_y_ = 0.0, max_x_ = 0.0, max_y_ = 0.0;
    double tolerance_ = 0.0;
};

// Plot polygons keyed by plot id. File format: CSV with columns plot_id,x,y;
// vertices of one plot appear consecutively in ring order.
std::map<std::string, Polygon> read_plots(const std::filesystem::path& path);
void write_plots(const std::filesystem::path& path, const std::map<std::string, Polygon>& plots);

}  // namespace agb
