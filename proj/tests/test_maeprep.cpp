#include "alspipe/maeprep.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace alspipe;
using maeprep::AugmentParams;
using maeprep::BevSpec;
using maeprep::VoxelSpec;
using pointcloud::PointTile;

TEST_SUITE("maeprep") {

TEST_CASE("crop_random: identity on an exactly-sized tile, determinism, containment") {
    const PointTile exact = fixtures::random_tile(500, {10, 10, 154, 154}, 1);
    const PointTile same = maeprep::crop_random(exact, 144.0, 99);
    CHECK(same.points.size() == exact.points.size());
    CHECK(same.bounds.minx == exact.bounds.minx);

    const PointTile big = fixtures::random_tile(5000, {0, 0, 500, 500}, 2);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const PointTile crop = maeprep::crop_random(big, 144.0, seed);
        CHECK(crop.bounds.minx >= big.bounds.minx);
        CHECK(crop.bounds.maxx <= big.bounds.maxx);
        CHECK(crop.bounds.width() == doctest::Approx(144.0));
        for (const auto& p : crop.points) {
            CHECK(p.x >= crop.bounds.minx);
            CHECK(p.x < crop.bounds.maxx);
        }
        const PointTile again = maeprep::crop_random(big, 144.0, seed);
        CHECK(again.bounds.minx == crop.bounds.minx);
        CHECK(again.points.size() == crop.points.size());
    }

    CHECK_THROWS(maeprep::crop_random(fixtures::random_tile(10, {0, 0, 100, 100}, 3), 144.0, 1));
}

TEST_CASE("augment: identity params change nothing") {
    const PointTile tile = fixtures::random_tile(1000, {0, 0, 144, 144}, 4);
    const PointTile out = maeprep::augment(tile, {});
    REQUIRE(out.points.size() == tile.points.size());
    for (std::size_t i = 0; i < tile.points.size(); ++i) {
        CHECK(out.points[i].x == tile.points[i].x);
        CHECK(out.points[i].y == tile.points[i].y);
        CHECK(out.points[i].z == tile.points[i].z);
    }
}

TEST_CASE("augment: flip_x is an involution and preserves pairwise distances") {
    const PointTile tile = fixtures::random_tile(500, {0, 0, 144, 144}, 5);
    AugmentParams flip;
    flip.flip_x = true;
    const PointTile once = maeprep::augment(tile, flip);
    const PointTile twice = maeprep::augment(once, flip);
    for (std::size_t i = 0; i < tile.points.size(); ++i) {
        CHECK(twice.points[i].x == doctest::Approx(tile.points[i].x).epsilon(1e-12));
        CHECK(twice.points[i].y == tile.points[i].y);
    }

    fixtures::Rng rng(6);
    for (int k = 0; k < 100; ++k) {
        const auto i = uniform_below(rng, tile.points.size());
        const auto j = uniform_below(rng, tile.points.size());
        const auto& a0 = tile.points[i];
        const auto& b0 = tile.points[j];
        const auto& a1 = once.points[i];
        const auto& b1 = once.points[j];
        const double d0 = std::hypot(a0.x - b0.x, a0.y - b0.y, a0.z - b0.z);
        const double d1 = std::hypot(a1.x - b1.x, a1.y - b1.y, a1.z - b1.z);
        CHECK(d1 == doctest::Approx(d0).epsilon(1e-12));
    }
}

TEST_CASE("augment: scale 2 doubles pairwise distances on 100 random pairs") {
    const PointTile tile = fixtures::random_tile(500, {0, 0, 144, 144}, 7);
    AugmentParams params;
    params.scale = 2.0;
    params.dx = 3.0;  // translation must not affect distances
    params.dz = -1.0;
    const PointTile out = maeprep::augment(tile, params);
    fixtures::Rng rng(8);
    for (int k = 0; k < 100; ++k) {
        const auto i = uniform_below(rng, tile.points.size());
        const auto j = uniform_below(rng, tile.points.size());
        const double d0 = std::hypot(tile.points[i].x - tile.points[j].x,
                                     tile.points[i].y - tile.points[j].y,
                                     tile.points[i].z - tile.points[j].z);
        const double d1 = std::hypot(out.points[i].x - out.points[j].x,
                                     out.points[i].y - out.points[j].y,
                                     out.points[i].z - out.points[j].z);
        CHECK(d1 == doctest::Approx(2.0 * d0).epsilon(1e-9));
    }
    CHECK(out.points.size() == tile.points.size());
}

TEST_CASE("voxelize: floor arithmetic splits neighboring points") {
    PointTile tile;
    tile.bounds = {0, 0, 10, 10};
    tile.points.push_back({0.0, 0.0, 0.0, 0, 1, 1, 1});
    tile.points.push_back({0.7, 0.0, 0.0, 0, 1, 1, 1});
    VoxelSpec spec;
    spec.voxel_size = 0.6;
    const auto grid = maeprep::voxelize(tile, spec);
    CHECK(grid.voxels.size() == 2);
}

TEST_CASE("voxelize: per-voxel cap keeps the first five in input order") {
    PointTile tile;
    tile.bounds = {0, 0, 10, 10};
    for (int i = 0; i < 7; ++i)
        tile.points.push_back({0.1, 0.1, 0.1, static_cast<std::uint16_t>(i), 1, 1, 1});
    VoxelSpec spec;
    const auto grid = maeprep::voxelize(tile, spec);
    REQUIRE(grid.voxels.size() == 1);
    CHECK(grid.voxels[0].count == 7);
    REQUIRE(grid.voxels[0].point_indices.size() == 5);
    for (std::uint32_t i = 0; i < 5; ++i)
        CHECK(grid.voxels[0].point_indices[i] == i);
}

TEST_CASE("voxelize matches the brute-force assignment pre-cap") {
    const PointTile tile = fixtures::random_tile(10000, {50, 50, 194, 194}, 9);
    VoxelSpec spec;
    spec.voxel_size = 0.6;
    spec.max_points_per_voxel = 1000000;  // pre-cap comparison
    const auto grid = maeprep::voxelize(tile, spec);
    const auto expected = oracles::brute_voxel_assignment(
        tile.points, grid.min_bound[0], grid.min_bound[1], grid.min_bound[2], spec.voxel_size);
    REQUIRE(grid.voxels.size() == expected.size());
    for (const auto& voxel : grid.voxels) {
        const auto it = expected.find(voxel.index);
        REQUIRE(it != expected.end());
        REQUIRE(voxel.point_indices.size() == it->second.size());
        for (std::size_t k = 0; k < it->second.size(); ++k)
            CHECK(voxel.point_indices[k] == it->second[k]);
    }
}

TEST_CASE("voxelize: caps never exceeded and stored points sit inside their voxel") {
    const PointTile tile = fixtures::random_tile(20000, {0, 0, 144, 144}, 10);
    VoxelSpec spec;
    const auto grid = maeprep::voxelize(tile, spec);
    CHECK(grid.voxels.size() <= spec.max_voxels);
    for (const auto& voxel : grid.voxels) {
        CHECK(voxel.point_indices.size() <= spec.max_points_per_voxel);
        for (std::uint32_t pi : voxel.point_indices) {
            const auto& p = tile.points[pi];
            CHECK(static_cast<std::int32_t>(
                      std::floor((p.x - grid.min_bound[0]) / spec.voxel_size)) == voxel.index[0]);
            CHECK(static_cast<std::int32_t>(
                      std::floor((p.z - grid.min_bound[2]) / spec.voxel_size)) == voxel.index[2]);
        }
    }
}

TEST_CASE("voxelize: max_voxels overflow keeps a seeded subset") {
    const PointTile tile = fixtures::random_tile(5000, {0, 0, 144, 144}, 11);
    VoxelSpec spec;
    spec.max_voxels = 100;
    spec.seed = 77;
    const auto grid = maeprep::voxelize(tile, spec);
    CHECK(grid.voxels.size() == 100);
    CHECK(grid.dropped_voxels > 0);
    const auto again = maeprep::voxelize(tile, spec);
    REQUIRE(again.voxels.size() == grid.voxels.size());
    for (std::size_t i = 0; i < grid.voxels.size(); ++i)
        CHECK(again.voxels[i].index == grid.voxels[i].index);
}

TEST_CASE("voxelize is translation-consistent for integer multiples of the voxel size") {
    PointTile tile = fixtures::random_tile(300, {0, 0, 12, 12}, 12, 0.0, 6.0);
    VoxelSpec spec;
    spec.voxel_size = 0.6;
    const auto base = maeprep::voxelize(tile, spec);

    PointTile shifted = tile;
    const double shift = 5 * spec.voxel_size;
    for (auto& p : shifted.points) {
        p.x += shift;
        p.y += shift;
        p.z += shift;
    }
    shifted.bounds = {tile.bounds.minx + shift, tile.bounds.miny + shift,
                      tile.bounds.maxx + shift, tile.bounds.maxy + shift};
    const auto moved = maeprep::voxelize(shifted, spec);
    REQUIRE(moved.voxels.size() == base.voxels.size());
    // min_bound z comes from the lowest point, which also moved by the shift,
    // so indices must match exactly.
    for (std::size_t i = 0; i < base.voxels.size(); ++i)
        CHECK(moved.voxels[i].index == base.voxels[i].index);
}

TEST_CASE("mask_bev: ratio arithmetic, conservation, target ranges") {
    const PointTile tile = fixtures::random_tile(30000, {0, 0, 144, 144}, 13, 0.0, 40.0);
    BevSpec spec;
    const auto bev = maeprep::build_bev(tile, spec);
    const std::size_t occupied = bev.cells.size();
    REQUIRE(occupied == 900);  // 144/4.8 = 30 per axis, dense tile

    const auto sample = maeprep::mask_bev(bev, 0.7, 21);
    CHECK(sample.masked_cell_indices.size() ==
          static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(occupied))));

    // pre-cap conservation: masked + visible points == input points
    CHECK(sample.masked_point_indices.size() + sample.visible_point_indices.size() ==
          tile.points.size());
    std::vector<std::uint32_t> all;
    all.insert(all.end(), sample.masked_point_indices.begin(), sample.masked_point_indices.end());
    all.insert(all.end(), sample.visible_point_indices.begin(),
               sample.visible_point_indices.end());
    std::sort(all.begin(), all.end());
    for (std::uint32_t i = 0; i < all.size(); ++i)
        CHECK(all[i] == i);

    // normalized targets live in [-1, 1]^3
    for (const auto& t : sample.coord_targets) {
        CHECK(t[0] >= -1.0f);
        CHECK(t[0] <= 1.0f);
        CHECK(t[1] >= -1.0f);
        CHECK(t[1] <= 1.0f);
        CHECK(t[2] >= -1.0f);
        CHECK(t[2] <= 1.0f);
    }

    // density = min(count, cap) / cap
    for (std::size_t m = 0; m < sample.masked_cell_indices.size(); ++m) {
        CHECK(sample.density_targets[m] >= 0.0f);
        CHECK(sample.density_targets[m] <= 1.0f);
    }

    // |masked| / occupied within 1/occupied of the ratio
    const double achieved =
        static_cast<double>(sample.masked_cell_indices.size()) / static_cast<double>(occupied);
    CHECK(std::abs(achieved - 0.7) <= 1.0 / static_cast<double>(occupied) + 1e-12);
}

TEST_CASE("mask_bev: saturated cell hits density 1.0") {
    PointTile tile;
    tile.bounds = {0, 0, 9.6, 9.6};
    for (int i = 0; i < 40; ++i)
        tile.points.push_back({1.0 + 0.01 * i, 1.0, 0.5, 0, 1, 1, 1});  // one cell, 40 points
    tile.points.push_back({6.0, 6.0, 0.5, 0, 1, 1, 1});                 // second occupied cell
    BevSpec spec;
    const auto bev = maeprep::build_bev(tile, spec);
    REQUIRE(bev.cells.size() == 2);
    const auto sample = maeprep::mask_bev(bev, 0.5, 3);
    REQUIRE(sample.masked_cell_indices.size() == 1);
    const bool masked_big = sample.masked_point_indices.size() == 40;
    if (masked_big) {
        CHECK(sample.density_targets[0] == 1.0f);
        CHECK(sample.coord_targets.size() == 30);  // capped at 30 stored targets
    } else {
        CHECK(sample.density_targets[0] == doctest::Approx(1.0f / 30.0f));
    }
}

TEST_CASE("mask_bev: reproducible per seed, z clamp counted") {
    PointTile tile = fixtures::random_tile(2000, {0, 0, 48, 48}, 14, 0.0, 300.0);
    BevSpec spec;  // z window 288 < 300 range
    const auto bev = maeprep::build_bev(tile, spec);
    CHECK(bev.z_clamped > 0);

    const auto a = maeprep::mask_bev(bev, 0.7, 5);
    const auto b = maeprep::mask_bev(bev, 0.7, 5);
    CHECK(a.masked_cell_indices == b.masked_cell_indices);
    CHECK(a.coord_targets == b.coord_targets);
    CHECK(a.density_targets == b.density_targets);

    CHECK_THROWS(maeprep::mask_bev(bev, 0.0, 5));
    CHECK_THROWS(maeprep::mask_bev(bev, 1.0, 5));
}

TEST_CASE("prepare_sample + write_sample: shapes match the sidecar") {
    const PointTile tile = fixtures::random_tile(20000, {0, 0, 500, 500}, 15, 0.0, 30.0);
    maeprep::PrepSpec spec;
    const auto sample = maeprep::prepare_sample(tile, spec, 31337, "sample_000");

    CHECK(sample.visible_points.size() > 0);
    CHECK(sample.mask.masked_cell_indices.size() > 0);
    CHECK(sample.mask.density_targets.size() == sample.mask.masked_cell_indices.size());

    const auto dir = std::filesystem::temp_directory_path() / "alspipe_test_prep";
    std::filesystem::remove_all(dir);
    maeprep::write_sample(dir, sample, spec);

    const auto bin_size = std::filesystem::file_size(dir / "sample_000.bin");
    const std::size_t expected =
        4 * (sample.visible_points.size() * 3 + sample.voxel_counts.size() +
             sample.mask.coord_targets.size() * 3 + sample.mask.density_targets.size());
    CHECK(bin_size == expected);

    std::ifstream json(dir / "sample_000.json");
    std::string text((std::istreambuf_iterator<char>(json)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"sample_id\": \"sample_000\"") != std::string::npos);
    CHECK(text.find("\"seed\": 31337") != std::string::npos);
    CHECK(text.find(std::to_string(sample.visible_points.size())) != std::string::npos);

    // same seed, same sample
    const auto again = maeprep::prepare_sample(tile, spec, 31337, "sample_000");
    CHECK(again.visible_points == sample.visible_points);
    CHECK(again.mask.coord_targets == sample.mask.coord_targets);
    std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
