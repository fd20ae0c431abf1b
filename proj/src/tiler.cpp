#include "alspipe/tiler.hpp"

#include "alspipe/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace alspipe::tiler {

std::vector<double> window_starts(double extent, const WindowSpec& spec) {
    if (!(spec.stride > 0.0) || spec.stride > spec.window)
        throw std::invalid_argument("window spec requires 0 < stride <= window");
    if (extent < spec.window)
        throw std::runtime_error("extent smaller than the window");

    const auto count = static_cast<std::size_t>(
        std::floor((extent - spec.window) / spec.stride)) + 1;
    std::vector<double> starts;
    starts.reserve(count + 1);
    for (std::size_t i = 0; i < count; ++i)
        starts.push_back(static_cast<double>(i) * spec.stride);
    if (spec.flush) {
        const double last = extent - spec.window;
        if (starts.back() < last)
            starts.push_back(last);
    }
    return starts;
}

std::vector<pointcloud::Bounds> windows(double extent_x, double extent_y, const WindowSpec& spec) {
    const auto xs = window_starts(extent_x, spec);
    const auto ys = window_starts(extent_y, spec);
    std::vector<pointcloud::Bounds> out;
    out.reserve(xs.size() * ys.size());
    for (double y : ys)
        for (double x : xs)
            out.push_back({x, y, x + spec.window, y + spec.window});
    return out;
}

std::vector<WindowCut> cut(const pointcloud::PointTile& tile, const WindowSpec& spec) {
    const auto xs = window_starts(tile.bounds.width(), spec);
    const auto ys = window_starts(tile.bounds.height(), spec);

    std::vector<WindowCut> out;
    out.reserve(xs.size() * ys.size());
    for (std::size_t r = 0; r < ys.size(); ++r) {
        for (std::size_t c = 0; c < xs.size(); ++c) {
            WindowCut cutout;
            cutout.row = static_cast<int>(r);
            cutout.col = static_cast<int>(c);
            cutout.bbox = {tile.bounds.minx + xs[c], tile.bounds.miny + ys[r],
                           tile.bounds.minx + xs[c] + spec.window,
                           tile.bounds.miny + ys[r] + spec.window};
            cutout.tile = pointcloud::crop(tile, cutout.bbox);
            cutout.empty = cutout.tile.points.empty();
            out.push_back(std::move(cutout));
        }
    }
    return out;
}

std::string_view to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

SplitAssignment split(const std::vector<std::string>& tile_ids,
                      const std::array<double, 3>& fractions, std::uint64_t seed) {
    if (tile_ids.empty())
        throw std::invalid_argument("split: empty tile id list");
    double sum = 0.0;
    for (double f : fractions) {
        if (f < 0.0)
            throw std::invalid_argument("split: negative fraction");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");

    const std::size_t n = tile_ids.size();

    // Largest-remainder apportionment.
    std::array<std::size_t, 3> sizes{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = fractions[i] * static_cast<double>(n);
        sizes[i] = static_cast<std::size_t>(std::floor(exact));
        remainders[i] = exact - std::floor(exact);
        assigned += sizes[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (remainders[a] != remainders[b])
            return remainders[a] > remainders[b];
        return a < b;
    });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned)
        sizes[order[k % 3]]++;

    std::vector<std::string> shuffled = tile_ids;
    std::sort(shuffled.begin(), shuffled.end());  // input-order independence
    Rng rng(seed);
    shuffle(shuffled, rng);

    SplitAssignment result;
    result.fractions = fractions;
    result.seed = seed;
    result.sizes = sizes;
    std::size_t pos = 0;
    for (std::size_t part = 0; part < 3; ++part) {
        for (std::size_t i = 0; i < sizes[part]; ++i, ++pos)
            result.assignment[shuffled[pos]] = static_cast<Split>(part);
    }
    return result;
}

}  // namespace alspipe::tiler
