#pragma once

// Synthetic inputs for tests: hand-built LAS payloads (independent of the
// library writer), random point tiles, ramp DEMs, and GeoJSON snippets.

#include "alspipe/pointcloud.hpp"
#include "alspipe/raster.hpp"
#include "alspipe/rng.hpp"

#include <cstring>
#include <string>
#include <vector>

namespace fixtures {

using alspipe::Rng;
using alspipe::pointcloud::Bounds;
using alspipe::pointcloud::PointRecord;
using alspipe::pointcloud::PointTile;

inline void put_u16(std::vector<std::byte>& b, std::uint16_t v) {
    b.push_back(std::byte(v & 0xff));
    b.push_back(std::byte(v >> 8));
}

inline void put_u32(std::vector<std::byte>& b, std::uint32_t v) {
    put_u16(b, static_cast<std::uint16_t>(v));
    put_u16(b, static_cast<std::uint16_t>(v >> 16));
}

inline void put_f64(std::vector<std::byte>& b, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u32(b, static_cast<std::uint32_t>(bits));
    put_u32(b, static_cast<std::uint32_t>(bits >> 32));
}

inline void put_i32(std::vector<std::byte>& b, std::int32_t v) {
    put_u32(b, static_cast<std::uint32_t>(v));
}

struct LasFixturePoint {
    std::int32_t x, y, z;  // raw integer coordinates
    std::uint16_t intensity = 0;
    std::uint8_t return_number = 1;
    std::uint8_t number_of_returns = 1;
    std::uint8_t classification = 0;
};

// Minimal LAS 1.2 / point format 0 payload built byte by byte.
inline std::vector<std::byte> make_las12_format0(const std::vector<LasFixturePoint>& points,
                                                 double scale = 0.01, double offset_x = 0.0,
                                                 double offset_y = 0.0, double offset_z = 0.0) {
    std::vector<std::byte> b;
    b.push_back(std::byte('L'));
    b.push_back(std::byte('A'));
    b.push_back(std::byte('S'));
    b.push_back(std::byte('F'));
    put_u16(b, 0);  // file source
    put_u16(b, 0);  // global encoding
    for (int i = 0; i < 16; ++i)
        b.push_back(std::byte(0));  // guid
    b.push_back(std::byte(1));      // major
    b.push_back(std::byte(2));      // minor
    for (int i = 0; i < 64; ++i)
        b.push_back(std::byte(0));  // sysid + software
    put_u16(b, 1);                  // day
    put_u16(b, 2024);               // year
    put_u16(b, 227);                // header size
    put_u32(b, 227);                // offset to point data
    put_u32(b, 0);                  // vlr count
    b.push_back(std::byte(0));      // format 0
    put_u16(b, 20);                 // record length
    put_u32(b, static_cast<std::uint32_t>(points.size()));
    for (int i = 0; i < 5; ++i)
        put_u32(b, 0);  // by return
    put_f64(b, scale);
    put_f64(b, scale);
    put_f64(b, scale);
    put_f64(b, offset_x);
    put_f64(b, offset_y);
    put_f64(b, offset_z);
    double minx = 0, maxx = 0, miny = 0, maxy = 0, minz = 0, maxz = 0;
    if (!points.empty()) {
        minx = maxx = points[0].x * scale + offset_x;
        miny = maxy = points[0].y * scale + offset_y;
        minz = maxz = points[0].z * scale + offset_z;
        for (const auto& p : points) {
            minx = std::min(minx, p.x * scale + offset_x);
            maxx = std::max(maxx, p.x * scale + offset_x);
            miny = std::min(miny, p.y * scale + offset_y);
            maxy = std::max(maxy, p.y * scale + offset_y);
            minz = std::min(minz, p.z * scale + offset_z);
            maxz = std::max(maxz, p.z * scale + offset_z);
        }
    }
    put_f64(b, maxx);
    put_f64(b, minx);
    put_f64(b, maxy);
    put_f64(b, miny);
    put_f64(b, maxz);
    put_f64(b, minz);

    for (const auto& p : points) {
        put_i32(b, p.x);
        put_i32(b, p.y);
        put_i32(b, p.z);
        put_u16(b, p.intensity);
        b.push_back(std::byte((p.return_number & 0x7) | ((p.number_of_returns & 0x7) << 3)));
        b.push_back(std::byte(p.classification & 0x1f));
        b.push_back(std::byte(0));  // scan angle
        b.push_back(std::byte(0));  // user data
        put_u16(b, 0);              // point source id
    }
    return b;
}

// Random tile with points strictly inside bounds; mixed classes and return
// patterns that always satisfy 1 <= rn <= nr.
inline PointTile random_tile(std::size_t n, Bounds bounds, std::uint64_t seed,
                             double zmin = 0.0, double zmax = 50.0) {
    Rng rng(seed);
    PointTile tile;
    tile.bounds = bounds;
    tile.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        PointRecord p;
        p.x = bounds.minx + alspipe::uniform01(rng) * bounds.width();
        p.y = bounds.miny + alspipe::uniform01(rng) * bounds.height();
        p.z = zmin + alspipe::uniform01(rng) * (zmax - zmin);
        p.number_of_returns = static_cast<std::uint8_t>(1 + alspipe::uniform_below(rng, 5));
        p.return_number =
            static_cast<std::uint8_t>(1 + alspipe::uniform_below(rng, p.number_of_returns));
        p.classification = alspipe::uniform01(rng) < 0.4 ? 2 : 1;
        p.intensity = static_cast<std::uint16_t>(alspipe::uniform_below(rng, 65536));
        tile.points.push_back(p);
    }
    return tile;
}

// z = gx * x + gy * y over a metric grid.
inline alspipe::raster::RasterGrid ramp_dem(int width, int height, double cell, double gx,
                                            double gy, int zone = 18) {
    alspipe::raster::RasterGrid dem(width, height, 0.0, height * cell, cell, -9999.0f,
                                    {alspipe::raster::CrsTag::Kind::Utm, zone,
                                     alspipe::geo::Hemisphere::North});
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const double x = dem.cell_center_x(c);
            const double y = dem.cell_center_y(r);
            dem.set(r, c, static_cast<float>(gx * x + gy * y));
        }
    }
    return dem;
}

inline std::string square_geojson(double minx, double miny, double maxx, double maxy) {
    auto ring = [&](double a, double b, double c, double d) {
        char buf[512];
        std::snprintf(buf, sizeof(buf),
                      "[[%.8f,%.8f],[%.8f,%.8f],[%.8f,%.8f],[%.8f,%.8f],[%.8f,%.8f]]", a, b, c, b,
                      c, d, a, d, a, b);
        return std::string(buf);
    };
    return "{\"type\":\"FeatureCollection\",\"features\":[{\"type\":\"Feature\",\"properties\":{},"
           "\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[" +
           ring(minx, miny, maxx, maxy) + "]}}]}";
}

}  // namespace fixtures
