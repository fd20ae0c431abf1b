#pragma once

#include "alspipe/pointcloud.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace alspipe::tiler {

struct WindowSpec {
    double window = 100.0;
    double stride = 50.0;
    // Appends a final start at extent - window when the stride does not land
    // there; off by default so the window-count formula stays exact.
    bool flush = false;
};

// Start offsets per axis: {0, s, 2s, ...}, floor((L - w) / s) + 1 of them.
std::vector<double> window_starts(double extent, const WindowSpec& spec);

// Cartesian product of per-axis starts, relative to (0, 0); row-major with
// the y starts outermost.
std::vector<pointcloud::Bounds> windows(double extent_x, double extent_y, const WindowSpec& spec);

struct WindowCut {
    int row = 0;  // y start index
    int col = 0;  // x start index
    pointcloud::Bounds bbox;
    pointcloud::PointTile tile;
    bool empty = false;
};

std::vector<WindowCut> cut(const pointcloud::PointTile& tile, const WindowSpec& spec);

enum class Split { Train, Val, Test };
std::string_view to_string(Split s);

struct SplitAssignment {
    std::map<std::string, Split> assignment;
    std::array<double, 3> fractions{};
    std::uint64_t seed = 0;
    std::array<std::size_t, 3> sizes{};
};

// Seeded shuffle then partition by cumulative fractions with
// largest-remainder rounding. Fractions must be non-negative and sum to 1.
SplitAssignment split(const std::vector<std::string>& tile_ids,
                      const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace alspipe::tiler
