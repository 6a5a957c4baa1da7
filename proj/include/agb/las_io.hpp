#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "agb/error.hpp"
#include "agb/geometry.hpp"

namespace agb {

inline constexpr std::uint8_t kClassGround = 2;

struct PointRecord {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    std::uint16_t intensity = 0;
    std::uint8_t return_number = 1;
    std::uint8_t number_of_returns = 1;
    std::uint8_t classification = 1;
    double gps_time = 0.0;
};

struct Bounds {
    double min_x = 0.0, min_y = 0.0, min_z = 0.0;
    double max_x = 0.0, max_y = 0.0, max_z = 0.0;
};

struct PointCloud {
    std::vector<PointRecord> points;
    std::string crs_label;
    std::array<double, 3> scale{0.001, 0.001, 0.001};
    std::array<double, 3> offset{0.0, 0.0, 0.0};

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }

    // Throws DataError on an empty cloud.
    Bounds bounds() const;

    // Same metadata, no points.
    PointCloud like() const {
        PointCloud out;
        out.crs_label = crs_label;
        out.scale = scale;
        out.offset = offset;
        return out;
    }
};

enum class LasErrorKind {
    io,
    unsupported_format,
    unsupported_version,
    compressed,
    malformed_header,
    truncated,
    out_of_range,
    empty_cloud,
};

class LasError : public DataError {
public:
    LasError(LasErrorKind kind, const std::string& message) : DataError(message), kind_(kind) {}
    LasErrorKind kind() const { return kind_; }

private:
    LasErrorKind kind_;
};

struct LasHeader {
    std::uint8_t version_major = 1;
    std::uint8_t version_minor = 2;
    std::uint16_t header_size = 0;
    std::uint32_t offset_to_points = 0;
    std::uint32_t vlr_count = 0;
    std::uint8_t point_format = 0;
    std::uint16_t record_length = 0;
    std::uint64_t point_count = 0;
    std::array<double, 3> scale{};
    std::array<double, 3> offset{};
    std::array<double, 3> min{};
    std::array<double, 3> max{};
};

LasHeader read_las_header(const std::filesystem::path& path);
PointCloud read_las(const std::filesystem::path& path);

struct LasWriteOptions {
    // 0 and 1 are written as LAS 1.2, 6 as LAS 1.4.
    std::uint8_t point_format = 1;
};

// Header extrema are the extrema of the quantized coordinates, i.e. exactly
// what read_las returns.
void write_las(const PointCloud& cloud, const std::filesystem::path& path,
               const LasWriteOptions& options = {});

struct TileIndex {
    std::int64_t col = 0;
    std::int64_t row = 0;
    auto operator<=>(const TileIndex&) const = default;
};

struct TileGrid {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double tile_size = 125.0;
};

TileIndex tile_of(const TileGrid& grid, double x, double y);

// Partition into square tiles, ordered by (col, row). Empty tiles are omitted.
std::vector<std::pair<TileIndex, PointCloud>> tile(const PointCloud& cloud, const TileGrid& grid);

// Points inside the polygon or on its boundary, in input order.
PointCloud clip_polygon(const PointCloud& cloud, const Polygon& polygon);

// Points within radius of a centre, in input order.
PointCloud clip_circle(const PointCloud& cloud, double cx, double cy, double radius);

PointCloud merge(const std::vector<PointCloud>& parts);

}  // namespace agb
