#pragma once

#include "alspipe/pointcloud.hpp"
#include "alspipe/rng.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace alspipe::maeprep {

struct AugmentParams {
    bool flip_x = false;
    bool flip_y = false;
    double scale = 1.0;
    double dx = 0.0;
    double dy = 0.0;
    double dz = 0.0;
};

struct AugmentRanges {
    double scale_min = 0.95;
    double scale_max = 1.05;
    double translate_xy = 5.0;  // +/- meters
    double translate_z = 1.0;
};

AugmentParams draw_augment_params(const AugmentRanges& ranges, Rng& rng);

// Uniformly placed axis-aligned side x side crop; throws when the tile is
// smaller than the crop.
pointcloud::PointTile crop_random(const pointcloud::PointTile& tile, double side,
                                  std::uint64_t seed);

// Flip about the bounds-center axes, scale about the center, then translate.
pointcloud::PointTile augment(const pointcloud::PointTile& tile, const AugmentParams& params);

struct VoxelSpec {
    double voxel_size = 0.6;
    std::size_t max_voxels = 200000;
    std::size_t max_points_per_voxel = 5;
    std::uint64_t seed = 0;  // voxel subset draw when max_voxels overflows
};

struct Voxel {
    std::array<std::int32_t, 3> index{};  // (i, j, k) from the tile min corner
    std::vector<std::uint32_t> point_indices;  // stored, capped
    std::uint32_t count = 0;                   // assigned, pre-cap
};

struct VoxelGrid {
    VoxelSpec spec;
    std::array<double, 3> min_bound{};  // x, y from bounds; z from the lowest point
    std::vector<Voxel> voxels;
    std::size_t dropped_voxels = 0;  // over the max_voxels cap
};

// floor((coord - min_bound) / voxel_size) indexing; points kept in input
// order, at most max_points_per_voxel stored per voxel. If occupied voxels
// exceed max_voxels, a seeded uniform subset is retained.
VoxelGrid voxelize(const pointcloud::PointTile& tile, const VoxelSpec& spec);

struct BevSpec {
    double cell_xy = 4.8;
    double cell_z = 288.0;  // one z layer spanning the crop
    std::size_t max_cells = 200000;
    std::size_t max_points_per_cell = 30;
    std::uint64_t seed = 0;
};

struct BevCell {
    std::int32_t i = 0;  // x index
    std::int32_t j = 0;  // y index
    std::vector<std::uint32_t> point_indices;  // every assigned point
};

struct BevGrid {
    BevSpec spec;
    double min_x = 0.0;
    double min_y = 0.0;
    double min_z = 0.0;
    std::vector<BevCell> cells;          // sorted by (i, j)
    std::size_t z_clamped = 0;           // points outside the z window
    std::size_t dropped_cells = 0;       // over the max_cells cap
    const pointcloud::PointTile* tile = nullptr;
};

BevGrid build_bev(const pointcloud::PointTile& tile, const BevSpec& spec);

struct MaskedSample {
    std::vector<std::array<std::int32_t, 2>> masked_cell_indices;
    // Cell-local normalized coordinates of each masked cell's stored points
    // (capped at max_points_per_cell), concatenated in masked-cell order.
    std::vector<std::array<float, 3>> coord_targets;
    std::vector<std::uint32_t> coord_targets_per_cell;
    std::vector<float> density_targets;  // min(count, cap) / cap per masked cell
    // Pre-cap point partition by masked/visible cell membership.
    std::vector<std::uint32_t> masked_point_indices;
    std::vector<std::uint32_t> visible_point_indices;
    std::uint64_t rng_seed = 0;
};

// Chooses round(ratio * occupied) occupied cells uniformly without
// replacement and derives the reconstruction targets. ratio in (0, 1).
MaskedSample mask_bev(const BevGrid& bev, double ratio, std::uint64_t seed);

struct PrepSpec {
    double crop_side = 144.0;
    VoxelSpec voxel;
    BevSpec bev;
    double mask_ratio = 0.7;
    AugmentRanges augment;
    bool augment_enabled = true;
};

struct PreparedSample {
    std::string sample_id;
    std::uint64_t seed = 0;
    AugmentParams params;
    std::vector<std::array<float, 3>> visible_points;  // from the visible voxel grid
    std::vector<float> voxel_counts;                   // per visible voxel, stored count
    MaskedSample mask;
    std::size_t cropped_points = 0;
    std::size_t bev_occupied = 0;
};

// crop -> augment -> BEV build -> mask -> voxelize the visible points.
PreparedSample prepare_sample(const pointcloud::PointTile& tile, const PrepSpec& spec,
                              std::uint64_t seed, const std::string& sample_id);

// {id}.bin: packed little-endian float32 arrays (visible points, voxel
// counts, coord targets, density targets); {id}.json: shapes, seed, spec.
void write_sample(const std::filesystem::path& dir, const PreparedSample& sample,
                  const PrepSpec& spec);

}  // namespace alspipe::maeprep
