#include "agb/las_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

namespace agb {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

constexpr std::size_t kHeaderSize12 = 227;
constexpr std::size_t kHeaderSize14 = 375;
constexpr std::size_t kVlrHeaderSize = 54;

std::size_t min_record_length(std::uint8_t format) {
    switch (format) {
        case 0: return 20;
        case 1: return 28;
        case 6: return 30;
        default: return 0;
    }
}

template <typename T>
T get(const std::vector<char>& buffer, std::size_t offset) {
    T value;
    std::memcpy(&value, buffer.data() + offset, sizeof(T));
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        auto* bytes = reinterpret_cast<char*>(&value);
        std::reverse(bytes, bytes + sizeof(T));
    }
    return value;
}

template <typename T>
void put(std::vector<char>& buffer, std::size_t offset, T value) {
    if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
        auto* bytes = reinterpret_cast<char*>(&value);
        std::reverse(bytes, bytes + sizeof(T));
    }
    std::memcpy(buffer.data() + offset, &value, sizeof(T));
}

std::vector<char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw LasError(LasErrorKind::io, "cannot open " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<char> buffer(size);
    in.seekg(0);
    if (size && !in.read(buffer.data(), static_cast<std::streamsize>(size))) {
        throw LasError(LasErrorKind::io, "cannot read " + path.string());
    }
    return buffer;
}

LasHeader parse_header(const std::vector<char>& buffer, const std::string& name) {
    if (buffer.size() < 4 || std::memcmp(buffer.data(), "LASF", 4) != 0) {
        throw LasError(LasErrorKind::unsupported_format, name + ": not a LAS file (missing LASF signature)");
    }
    if (buffer.size() < kHeaderSize12) {
        throw LasError(LasErrorKind::malformed_header, name + ": header shorter than 227 bytes");
    }

    LasHeader h;
    h.version_major = get<std::uint8_t>(buffer, 24);
    h.version_minor = get<std::uint8_t>(buffer, 25);
    if (h.version_major != 1 || (h.version_minor != 2 && h.version_minor != 4)) {
        throw LasError(LasErrorKind::unsupported_version,
                       name + ": unsupported LAS version " + std::to_string(h.version_major) + "." +
                           std::to_string(h.version_minor) + " (1.2 and 1.4 are supported)");
    }
    h.header_size = get<std::uint16_t>(buffer, 94);
    h.offset_to_points = get<std::uint32_t>(buffer, 96);
    h.vlr_count = get<std::uint32_t>(buffer, 100);
    const auto raw_format = get<std::uint8_t>(buffer, 104);
    h.record_length = get<std::uint16_t>(buffer, 105);

    if (raw_format & 0xC0) {
        throw LasError(LasErrorKind::compressed,
                       name + ": LAZ-compressed point data; decompress to LAS first (e.g. laszip -i in.laz -o out.las)");
    }
    h.point_format = raw_format;
    if (min_record_length(h.point_format) == 0) {
        throw LasError(LasErrorKind::unsupported_format,
                       name + ": unsupported point data format " + std::to_string(h.point_format) +
                           " (0, 1 and 6 are supported)");
    }

    const std::size_t required_header = h.version_minor == 4 ? kHeaderSize14 : kHeaderSize12;
    if (h.header_size < required_header || buffer.size() < required_header) {
        throw LasError(LasErrorKind::malformed_header, name + ": header size " + std::to_string(h.header_size) +
                                                           " too small for LAS 1." +
                                                           std::to_string(h.version_minor));
    }
    if (h.offset_to_points < h.header_size) {
        throw LasError(LasErrorKind::malformed_header, name + ": point data offset inside header");
    }
    if (h.record_length < min_record_length(h.point_format)) {
        throw LasError(LasErrorKind::malformed_header, name + ": point record length " +
                                                           std::to_string(h.record_length) + " too short for format " +
                                                           std::to_string(h.point_format));
    }

    std::uint64_t count = get<std::uint32_t>(buffer, 107);
    if (h.version_minor == 4) {
        const auto count64 = get<std::uint64_t>(buffer, 247);
        if (count64 != 0) count = count64;
    }
    h.point_count = count;

    for (int axis = 0; axis < 3; ++axis) {
        h.scale[axis] = get<double>(buffer, 131 + 8 * axis);
        h.offset[axis] = get<double>(buffer, 155 + 8 * axis);
        h.max[axis] = get<double>(buffer, 179 + 16 * axis);
        h.min[axis] = get<double>(buffer, 187 + 16 * axis);
        if (!(h.scale[axis] > 0.0) || !std::isfinite(h.scale[axis]) || !std::isfinite(h.offset[axis])) {
            throw LasError(LasErrorKind::malformed_header, name + ": invalid scale/offset");
        }
    }
    return h;
}

std::string read_crs(const std::vector<char>& buffer, const LasHeader& h, const std::string& name) {
    std::string crs;
    std::size_t pos = h.header_size;
    for (std::uint32_t i = 0; i < h.vlr_count; ++i) {
        if (pos + kVlrHeaderSize > h.offset_to_points) {
            throw LasError(LasErrorKind::malformed_header, name + ": variable length records overrun point data");
        }
        const std::string user_id(buffer.data() + pos + 2, strnlen(buffer.data() + pos + 2, 16));
        const auto record_id = get<std::uint16_t>(buffer, pos + 18);
        const auto length = get<std::uint16_t>(buffer, pos + 20);
        const std::size_t body = pos + kVlrHeaderSize;
        if (body + length > h.offset_to_points) {
            throw LasError(LasErrorKind::malformed_header, name + ": variable length record overruns point data");
        }
        if (user_id == "laszip encoded") {
            throw LasError(LasErrorKind::compressed, name + ": LAZ-compressed point data; decompress to LAS first");
        }
        if (user_id == "LASF_Projection" && record_id == 2112) {
            crs.assign(buffer.data() + body, strnlen(buffer.data() + body, length));
        }
        pos = body + length;
    }
    return crs;
}

}  // namespace

Bounds PointCloud::bounds() const {
    if (points.empty()) throw DataError("bounds of an empty point cloud");
    Bounds b{points[0].x, points[0].y, points[0].z, points[0].x, points[0].y, points[0].z};
    for (const auto& p : points) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.min_z = std::min(b.min_z, p.z);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
        b.max_z = std::max(b.max_z, p.z);
    }
    return b;
}

LasHeader read_las_header(const std::filesystem::path& path) {
    return parse_header(slurp(path), path.string());
}

PointCloud read_las(const std::filesystem::path& path) {
    const std::vector<char> buffer = slurp(path);
    const std::string name = path.string();
    const LasHeader h = parse_header(buffer, name);

    PointCloud cloud;
    cloud.scale = h.scale;
    cloud.offset = h.offset;
    cloud.crs_label = read_crs(buffer, h, name);

    const std::uint64_t payload = h.point_count * h.record_length;
    if (h.point_count > (std::numeric_limits<std::uint64_t>::max() / std::max<std::uint64_t>(h.record_length, 1)) ||
        h.offset_to_points + payload > buffer.size()) {
        throw LasError(LasErrorKind::truncated,
                       name + ": truncated point data (header declares " + std::to_string(h.point_count) + " points)");
    }

    cloud.points.resize(h.point_count);
    for (std::uint64_t i = 0; i < h.point_count; ++i) {
        const std::size_t at = h.offset_to_points + i * h.record_length;
        PointRecord& p = cloud.points[i];
        p.x = get<std::int32_t>(buffer, at) * h.scale[0] + h.offset[0];
        p.y = get<std::int32_t>(buffer, at + 4) * h.scale[1] + h.offset[1];
        p.z = get<std::int32_t>(buffer, at + 8) * h.scale[2] + h.offset[2];
        p.intensity = get<std::uint16_t>(buffer, at + 12);
        const auto bits = get<std::uint8_t>(buffer, at + 14);
        if (h.point_format == 6) {
            p.return_number = bits & 0x0F;
            p.number_of_returns = (bits >> 4) & 0x0F;
            p.classification = get<std::uint8_t>(buffer, at + 16);
            p.gps_time = get<double>(buffer, at + 22);
        } else {
            p.return_number = bits & 0x07;
            p.number_of_returns = (bits >> 3) & 0x07;
            p.classification = get<std::uint8_t>(buffer, at + 15) & 0x1F;
            p.gps_time = h.point_format == 1 ? get<double>(buffer, at + 20) : 0.0;
        }
    }
    return cloud;
}

void write_las(const PointCloud& cloud, const std::filesystem::path& path, const LasWriteOptions& options) {
    if (cloud.empty()) throw LasError(LasErrorKind::empty_cloud, "refusing to write an empty point cloud");
    const std::uint8_t format = options.point_format;
    const std::size_t record_length = min_record_length(format);
    if (record_length == 0) {
        throw LasError(LasErrorKind::unsupported_format, "cannot write point data format " + std::to_string(format));
    }
    for (int axis = 0; axis < 3; ++axis) {
        if (!(cloud.scale[axis] > 0.0) || !std::isfinite(cloud.offset[axis])) {
            throw LasError(LasErrorKind::out_of_range, "invalid scale/offset");
        }
    }
    const bool v14 = format == 6;
    const std::size_t header_size = v14 ? kHeaderSize14 : kHeaderSize12;
    if (!v14 && cloud.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw LasError(LasErrorKind::out_of_range, "too many points for LAS 1.2");
    }

    const std::string& crs = cloud.crs_label;
    const std::size_t crs_length = crs.empty() ? 0 : crs.size() + 1;
    if (crs_length > std::numeric_limits<std::uint16_t>::max()) {
        throw LasError(LasErrorKind::out_of_range, "CRS label too long");
    }
    const std::size_t vlr_bytes = crs_length ? kVlrHeaderSize + crs_length : 0;
    const std::size_t offset_to_points = header_size + vlr_bytes;

    std::vector<char> buffer(offset_to_points + record_length * cloud.size(), 0);

    std::array<std::int32_t, 3> raw_min{}, raw_max{};
    std::array<std::uint64_t, 15> by_return{};
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const PointRecord& p = cloud.points[i];
        const std::array<double, 3> xyz{p.x, p.y, p.z};
        std::array<std::int32_t, 3> raw{};
        for (int axis = 0; axis < 3; ++axis) {
            const double q = std::round((xyz[axis] - cloud.offset[axis]) / cloud.scale[axis]);
            if (!std::isfinite(q) || q < std::numeric_limits<std::int32_t>::min() ||
                q > std::numeric_limits<std::int32_t>::max()) {
                throw LasError(LasErrorKind::out_of_range,
                               "coordinate outside representable range for scale/offset (point " +
                                   std::to_string(i) + ")");
            }
            raw[axis] = static_cast<std::int32_t>(q);
            if (i == 0 || raw[axis] < raw_min[axis]) raw_min[axis] = raw[axis];
            if (i == 0 || raw[axis] > raw_max[axis]) raw_max[axis] = raw[axis];
        }
        const int max_returns = v14 ? 15 : 7;
        if (p.return_number < 1 || p.return_number > max_returns || p.number_of_returns > max_returns ||
            p.return_number > p.number_of_returns) {
            throw LasError(LasErrorKind::out_of_range,
                           "invalid return numbering for point " + std::to_string(i) + " in format " +
                               std::to_string(format));
        }
        ++by_return[p.return_number - 1];

        const std::size_t at = offset_to_points + i * record_length;
        put<std::int32_t>(buffer, at, raw[0]);
        put<std::int32_t>(buffer, at + 4, raw[1]);
        put<std::int32_t>(buffer, at + 8, raw[2]);
        put<std::uint16_t>(buffer, at + 12, p.intensity);
        if (v14) {
            put<std::uint8_t>(buffer, at + 14,
                              static_cast<std::uint8_t>((p.return_number & 0x0F) | (p.number_of_returns << 4)));
            put<std::uint8_t>(buffer, at + 16, p.classification);
            put<double>(buffer, at + 22, p.gps_time);
        } else {
            put<std::uint8_t>(buffer, at + 14,
                              static_cast<std::uint8_t>((p.return_number & 0x07) | ((p.number_of_returns & 0x07) << 3)));
            put<std::uint8_t>(buffer, at + 15, static_cast<std::uint8_t>(p.classification & 0x1F));
            if (format == 1) put<double>(buffer, at + 20, p.gps_time);
        }
    }

    std::memcpy(buffer.data(), "LASF", 4);
    put<std::uint16_t>(buffer, 6, v14 ? 0x10 : 0);  // global encoding: WKT bit for 1.4
    put<std::uint8_t>(buffer, 24, 1);
    put<std::uint8_t>(buffer, 25, v14 ? 4 : 2);
    const char software[] = "agb";
    std::memcpy(buffer.data() + 58, software, sizeof(software) - 1);
    std::memcpy(buffer.data() + 26, software, sizeof(software) - 1);
    put<std::uint16_t>(buffer, 94, static_cast<std::uint16_t>(header_size));
    put<std::uint32_t>(buffer, 96, static_cast<std::uint32_t>(offset_to_points));
    put<std::uint32_t>(buffer, 100, crs_length ? 1u : 0u);
    put<std::uint8_t>(buffer, 104, format);
    put<std::uint16_t>(buffer, 105, static_cast<std::uint16_t>(record_length));
    if (!v14) {
        put<std::uint32_t>(buffer, 107, static_cast<std::uint32_t>(cloud.size()));
        for (int r = 0; r < 5; ++r) put<std::uint32_t>(buffer, 111 + 4 * r, static_cast<std::uint32_t>(by_return[r]));
    }
    for (int axis = 0; axis < 3; ++axis) {
        put<double>(buffer, 131 + 8 * axis, cloud.scale[axis]);
        put<double>(buffer, 155 + 8 * axis, cloud.offset[axis]);
        put<double>(buffer, 179 + 16 * axis, raw_max[axis] * cloud.scale[axis] + cloud.offset[axis]);
        put<double>(buffer, 187 + 16 * axis, raw_min[axis] * cloud.scale[axis] + cloud.offset[axis]);
    }
    if (v14) {
        put<std::uint64_t>(buffer, 247, cloud.size());
        for (int r = 0; r < 15; ++r) put<std::uint64_t>(buffer, 255 + 8 * r, by_return[r]);
    }

    if (crs_length) {
        const std::size_t at = header_size;
        const char user_id[] = "LASF_Projection";
        std::memcpy(buffer.data() + at + 2, user_id, sizeof(user_id) - 1);
        put<std::uint16_t>(buffer, at + 18, 2112);
        put<std::uint16_t>(buffer, at + 20, static_cast<std::uint16_t>(crs_length));
        std::memcpy(buffer.data() + at + kVlrHeaderSize, crs.data(), crs.size());
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw LasError(LasErrorKind::io, "cannot write " + path.string());
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (!out) throw LasError(LasErrorKind::io, "write failed for " + path.string());
}

TileIndex tile_of(const TileGrid& grid, double x, double y) {
    return {static_cast<std::int64_t>(std::floor((x - grid.origin_x) / grid.tile_size)),
            static_cast<std::int64_t>(std::floor((y - grid.origin_y) / grid.tile_size))};
}

std::vector<std::pair<TileIndex, PointCloud>> tile(const PointCloud& cloud, const TileGrid& grid) {
    if (!(grid.tile_size > 0.0)) throw ConfigError("tile size must be positive");
    std::map<TileIndex, PointCloud> tiles;
    for (const auto& p : cloud.points) {
        const TileIndex index = tile_of(grid, p.x, p.y);
        auto [it, inserted] = tiles.try_emplace(index);
        if (inserted) it->second = cloud.like();
        it->second.points.push_back(p);
    }
    std::vector<std::pair<TileIndex, PointCloud>> out;
    out.reserve(tiles.size());
    for (auto& [index, part] : tiles) out.emplace_back(index, std::move(part));
    return out;
}

PointCloud clip_polygon(const PointCloud& cloud, const Polygon& polygon) {
    PointCloud out = cloud.like();
    for (const auto& p : cloud.points) {
        if (polygon.contains(p.x, p.y)) out.points.push_back(p);
    }
    return out;
}

PointCloud clip_circle(const PointCloud& cloud, double cx, double cy, double radius) {
    PointCloud out = cloud.like();
    const double r2 = radius * radius;
    for (const auto& p : cloud.points) {
        const double dx = p.x - cx, dy = p.y - cy;
        if (dx * dx + dy * dy <= r2) out.points.push_back(p);
    }
    return out;
}

PointCloud merge(const std::vector<PointCloud>& parts) {
    PointCloud out;
    if (!parts.empty()) out = parts.front().like();
    std::size_t total = 0;
    for (const auto& part : parts) total += part.size();
    out.points.reserve(total);
    for (const auto& part : parts) out.points.insert(out.points.end(), part.points.begin(), part.points.end());
    return out;
}

}  // namespace agb
