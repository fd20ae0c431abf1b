#pragma once

#include "alspipe/geo.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace alspipe::pointcloud {

struct PointRecord {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    std::uint16_t intensity = 0;
    std::uint8_t classification = 0;  // 2 = ground
    std::uint8_t return_number = 1;
    std::uint8_t number_of_returns = 1;
};

struct Bounds {
    double minx = 0.0;
    double miny = 0.0;
    double maxx = 0.0;
    double maxy = 0.0;

    double width() const { return maxx - minx; }
    double height() const { return maxy - miny; }
    double area() const { return width() * height(); }
};

struct PointTile {
    std::vector<PointRecord> points;
    Bounds bounds;
    int utm_zone = 0;
    geo::Hemisphere hemisphere = geo::Hemisphere::North;
    std::string source_id;
    int capture_year = 0;
};

struct LasError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// LAS 1.2-1.4, point record formats 0, 1, 6. VLRs are skipped. Compressed
// (LAZ) payloads are rejected.
PointTile parse_las(std::span<const std::byte> bytes);

bool is_laz(std::span<const std::byte> bytes);

struct LasWriteOptions {
    double scale = 0.001;  // same quantum for x, y, z
};

// Emits LAS 1.4 / format 6 with offsets at the tile's minimum corner.
std::vector<std::byte> write_las(const PointTile& tile, const LasWriteOptions& options = {});

// Half-open membership: minx <= x < maxx, miny <= y < maxy. Result bounds are
// the bbox itself; an empty result is legal.
PointTile crop(const PointTile& tile, const Bounds& bbox);

}  // namespace alspipe::pointcloud
