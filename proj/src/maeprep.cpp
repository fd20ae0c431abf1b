#include "alspipe/maeprep.hpp"

#include "alspipe/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace alspipe::maeprep {

AugmentParams draw_augment_params(const AugmentRanges& ranges, Rng& rng) {
    AugmentParams p;
    p.flip_x = uniform01(rng) < 0.5;
    p.flip_y = uniform01(rng) < 0.5;
    p.scale = uniform_range(rng, ranges.scale_min, ranges.scale_max);
    p.dx = uniform_range(rng, -ranges.translate_xy, ranges.translate_xy);
    p.dy = uniform_range(rng, -ranges.translate_xy, ranges.translate_xy);
    p.dz = uniform_range(rng, -ranges.translate_z, ranges.translate_z);
    return p;
}

pointcloud::PointTile crop_random(const pointcloud::PointTile& tile, double side,
                                  std::uint64_t seed) {
    if (!(side > 0.0))
        throw std::invalid_argument("crop side must be > 0");
    const double span_x = tile.bounds.width() - side;
    const double span_y = tile.bounds.height() - side;
    if (span_x < 0.0 || span_y < 0.0)
        throw std::runtime_error("tile smaller than requested crop side");

    Rng rng(seed);
    const double x0 = tile.bounds.minx + (span_x > 0.0 ? uniform01(rng) * span_x : 0.0);
    const double y0 = tile.bounds.miny + (span_y > 0.0 ? uniform01(rng) * span_y : 0.0);
    return pointcloud::crop(tile, {x0, y0, x0 + side, y0 + side});
}

pointcloud::PointTile augment(const pointcloud::PointTile& tile, const AugmentParams& params) {
    pointcloud::PointTile out = tile;
    const double cx = (tile.bounds.minx + tile.bounds.maxx) / 2.0;
    const double cy = (tile.bounds.miny + tile.bounds.maxy) / 2.0;

    // z center from the point extent; flips and xy-scaling do not need it,
    // but isotropic scaling does.
    double zmin = std::numeric_limits<double>::infinity(), zmax = -zmin;
    for (const auto& p : tile.points) {
        zmin = std::min(zmin, p.z);
        zmax = std::max(zmax, p.z);
    }
    const double cz = tile.points.empty() ? 0.0 : (zmin + zmax) / 2.0;

    // x + (x - c)(s - 1) == c + (x - c)s, but leaves coordinates bit-identical
    // under identity params.
    const double growth = params.scale - 1.0;
    for (auto& p : out.points) {
        if (params.flip_x)
            p.x = 2.0 * cx - p.x;
        if (params.flip_y)
            p.y = 2.0 * cy - p.y;
        p.x += (p.x - cx) * growth + params.dx;
        p.y += (p.y - cy) * growth + params.dy;
        p.z += (p.z - cz) * growth + params.dz;
    }

    out.bounds = {tile.bounds.minx + (tile.bounds.minx - cx) * growth + params.dx,
                  tile.bounds.miny + (tile.bounds.miny - cy) * growth + params.dy,
                  tile.bounds.maxx + (tile.bounds.maxx - cx) * growth + params.dx,
                  tile.bounds.maxy + (tile.bounds.maxy - cy) * growth + params.dy};
    return out;
}

VoxelGrid voxelize(const pointcloud::PointTile& tile, const VoxelSpec& spec) {
    if (!(spec.voxel_size > 0.0) || spec.max_voxels == 0 || spec.max_points_per_voxel == 0)
        throw std::invalid_argument("voxel spec values must be positive");

    VoxelGrid grid;
    grid.spec = spec;

    double zmin = 0.0;
    if (!tile.points.empty()) {
        zmin = std::numeric_limits<double>::infinity();
        for (const auto& p : tile.points)
            zmin = std::min(zmin, p.z);
    }
    grid.min_bound = {tile.bounds.minx, tile.bounds.miny, zmin};

    std::map<std::array<std::int32_t, 3>, std::size_t> lookup;
    for (std::size_t pi = 0; pi < tile.points.size(); ++pi) {
        const auto& p = tile.points[pi];
        const std::array<std::int32_t, 3> idx{
            static_cast<std::int32_t>(std::floor((p.x - grid.min_bound[0]) / spec.voxel_size)),
            static_cast<std::int32_t>(std::floor((p.y - grid.min_bound[1]) / spec.voxel_size)),
            static_cast<std::int32_t>(std::floor((p.z - grid.min_bound[2]) / spec.voxel_size))};
        auto [it, inserted] = lookup.try_emplace(idx, grid.voxels.size());
        if (inserted) {
            Voxel v;
            v.index = idx;
            grid.voxels.push_back(std::move(v));
        }
        Voxel& voxel = grid.voxels[it->second];
        voxel.count++;
        if (voxel.point_indices.size() < spec.max_points_per_voxel)
            voxel.point_indices.push_back(static_cast<std::uint32_t>(pi));
    }

    if (grid.voxels.size() > spec.max_voxels) {
        Rng rng(spec.seed);
        const auto keep = sample_indices(grid.voxels.size(), spec.max_voxels, rng);
        std::vector<bool> keep_mask(grid.voxels.size(), false);
        for (std::size_t i : keep)
            keep_mask[i] = true;
        std::vector<Voxel> kept;
        kept.reserve(spec.max_voxels);
        for (std::size_t i = 0; i < grid.voxels.size(); ++i) {
            if (keep_mask[i])
                kept.push_back(std::move(grid.voxels[i]));
            else
                grid.dropped_voxels++;
        }
        grid.voxels = std::move(kept);
    }
    return grid;
}

BevGrid build_bev(const pointcloud::PointTile& tile, const BevSpec& spec) {
    if (!(spec.cell_xy > 0.0) || !(spec.cell_z > 0.0) || spec.max_cells == 0 ||
        spec.max_points_per_cell == 0)
        throw std::invalid_argument("BEV spec values must be positive");

    BevGrid grid;
    grid.spec = spec;
    grid.min_x = tile.bounds.minx;
    grid.min_y = tile.bounds.miny;
    grid.tile = &tile;

    double zmin = 0.0;
    if (!tile.points.empty()) {
        zmin = std::numeric_limits<double>::infinity();
        for (const auto& p : tile.points)
            zmin = std::min(zmin, p.z);
    }
    grid.min_z = zmin;

    std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> lookup;
    for (std::size_t pi = 0; pi < tile.points.size(); ++pi) {
        const auto& p = tile.points[pi];
        const auto i = static_cast<std::int32_t>(std::floor((p.x - grid.min_x) / spec.cell_xy));
        const auto j = static_cast<std::int32_t>(std::floor((p.y - grid.min_y) / spec.cell_xy));
        // Single z layer: points above the window are clamped in and counted.
        if (p.z - grid.min_z >= spec.cell_z)
            grid.z_clamped++;
        auto [it, inserted] = lookup.try_emplace({i, j}, grid.cells.size());
        if (inserted) {
            BevCell cell;
            cell.i = i;
            cell.j = j;
            grid.cells.push_back(std::move(cell));
        }
        grid.cells[it->second].point_indices.push_back(static_cast<std::uint32_t>(pi));
    }

    if (grid.cells.size() > spec.max_cells) {
        Rng rng(spec.seed);
        const auto keep = sample_indices(grid.cells.size(), spec.max_cells, rng);
        std::vector<bool> keep_mask(grid.cells.size(), false);
        for (std::size_t i : keep)
            keep_mask[i] = true;
        std::vector<BevCell> kept;
        kept.reserve(spec.max_cells);
        for (std::size_t i = 0; i < grid.cells.size(); ++i) {
            if (keep_mask[i])
                kept.push_back(std::move(grid.cells[i]));
            else
                grid.dropped_cells++;
        }
        grid.cells = std::move(kept);
    }

    std::sort(grid.cells.begin(), grid.cells.end(), [](const BevCell& a, const BevCell& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    return grid;
}

MaskedSample mask_bev(const BevGrid& bev, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0) || !(ratio < 1.0))
        throw std::invalid_argument("mask ratio must be in (0, 1)");
    if (bev.cells.empty())
        throw std::runtime_error("mask_bev: no occupied BEV cells");
    if (bev.tile == nullptr)
        throw std::runtime_error("mask_bev: BEV grid lost its tile");

    const std::size_t occupied = bev.cells.size();
    const auto n_masked = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(occupied)));

    Rng rng(seed);
    std::vector<std::size_t> chosen = sample_indices(occupied, n_masked, rng);
    std::sort(chosen.begin(), chosen.end());
    std::vector<bool> masked(occupied, false);
    for (std::size_t i : chosen)
        masked[i] = true;

    const double half_xy = bev.spec.cell_xy / 2.0;
    const double half_z = bev.spec.cell_z / 2.0;
    const auto cap = bev.spec.max_points_per_cell;
    const auto& points = bev.tile->points;

    MaskedSample sample;
    sample.rng_seed = seed;
    for (std::size_t ci = 0; ci < occupied; ++ci) {
        const BevCell& cell = bev.cells[ci];
        if (!masked[ci]) {
            sample.visible_point_indices.insert(sample.visible_point_indices.end(),
                                                cell.point_indices.begin(),
                                                cell.point_indices.end());
            continue;
        }
        sample.masked_cell_indices.push_back({cell.i, cell.j});
        sample.masked_point_indices.insert(sample.masked_point_indices.end(),
                                           cell.point_indices.begin(), cell.point_indices.end());

        const double center_x = bev.min_x + (cell.i + 0.5) * bev.spec.cell_xy;
        const double center_y = bev.min_y + (cell.j + 0.5) * bev.spec.cell_xy;
        const double center_z = bev.min_z + half_z;

        const std::size_t stored = std::min<std::size_t>(cell.point_indices.size(), cap);
        for (std::size_t k = 0; k < stored; ++k) {
            const auto& p = points[cell.point_indices[k]];
            const auto norm = [](double v) {
                return static_cast<float>(std::clamp(v, -1.0, 1.0));
            };
            sample.coord_targets.push_back({norm((p.x - center_x) / half_xy),
                                            norm((p.y - center_y) / half_xy),
                                            norm((p.z - center_z) / half_z)});
        }
        sample.coord_targets_per_cell.push_back(static_cast<std::uint32_t>(stored));
        sample.density_targets.push_back(
            static_cast<float>(static_cast<double>(std::min<std::size_t>(cell.point_indices.size(), cap)) /
                               static_cast<double>(cap)));
    }
    return sample;
}

PreparedSample prepare_sample(const pointcloud::PointTile& tile, const PrepSpec& spec,
                              std::uint64_t seed, const std::string& sample_id) {
    PreparedSample out;
    out.sample_id = sample_id;
    out.seed = seed;

    Rng rng(seed);
    pointcloud::PointTile cropped = crop_random(tile, spec.crop_side, rng());
    if (spec.augment_enabled) {
        out.params = draw_augment_params(spec.augment, rng);
        cropped = augment(cropped, out.params);
    }
    out.cropped_points = cropped.points.size();

    const BevGrid bev = build_bev(cropped, spec.bev);
    out.bev_occupied = bev.cells.size();
    out.mask = mask_bev(bev, spec.mask_ratio, rng());

    // Encoder-side input: the visible points, re-voxelized at fine resolution.
    pointcloud::PointTile visible;
    visible.bounds = cropped.bounds;
    visible.points.reserve(out.mask.visible_point_indices.size());
    for (std::uint32_t pi : out.mask.visible_point_indices)
        visible.points.push_back(cropped.points[pi]);

    VoxelSpec vspec = spec.voxel;
    vspec.seed = rng();
    const VoxelGrid voxels = voxelize(visible, vspec);
    for (const Voxel& v : voxels.voxels) {
        for (std::uint32_t pi : v.point_indices) {
            const auto& p = visible.points[pi];
            out.visible_points.push_back({static_cast<float>(p.x - cropped.bounds.minx),
                                          static_cast<float>(p.y - cropped.bounds.miny),
                                          static_cast<float>(p.z)});
        }
        out.voxel_counts.push_back(static_cast<float>(v.point_indices.size()));
    }
    return out;
}

void write_sample(const std::filesystem::path& dir, const PreparedSample& sample,
                  const PrepSpec& spec) {
    std::filesystem::create_directories(dir);

    std::vector<std::byte> bin;
    auto append_floats = [&bin](const float* data, std::size_t n) {
        const auto* raw = reinterpret_cast<const std::byte*>(data);
        bin.insert(bin.end(), raw, raw + n * sizeof(float));
    };
    for (const auto& p : sample.visible_points)
        append_floats(p.data(), 3);
    append_floats(sample.voxel_counts.data(), sample.voxel_counts.size());
    for (const auto& t : sample.mask.coord_targets)
        append_floats(t.data(), 3);
    append_floats(sample.mask.density_targets.data(), sample.mask.density_targets.size());

    atomic_write_file(dir / (sample.sample_id + ".bin"), bin);

    std::ostringstream js;
    js << "{\n";
    js << "  \"sample_id\": \"" << sample.sample_id << "\",\n";
    js << "  \"seed\": " << sample.seed << ",\n";
    js << "  \"spec\": {\"crop_side\": " << format_double(spec.crop_side, 3)
       << ", \"voxel_size\": " << format_double(spec.voxel.voxel_size, 3)
       << ", \"max_voxels\": " << spec.voxel.max_voxels
       << ", \"max_points_per_voxel\": " << spec.voxel.max_points_per_voxel
       << ", \"bev_cell_xy\": " << format_double(spec.bev.cell_xy, 3)
       << ", \"bev_cell_z\": " << format_double(spec.bev.cell_z, 3)
       << ", \"bev_max_cells\": " << spec.bev.max_cells
       << ", \"bev_max_points_per_cell\": " << spec.bev.max_points_per_cell
       << ", \"mask_ratio\": " << format_double(spec.mask_ratio, 3) << "},\n";
    js << "  \"augment\": {\"flip_x\": " << (sample.params.flip_x ? "true" : "false")
       << ", \"flip_y\": " << (sample.params.flip_y ? "true" : "false")
       << ", \"scale\": " << format_double(sample.params.scale, 6)
       << ", \"dx\": " << format_double(sample.params.dx, 6)
       << ", \"dy\": " << format_double(sample.params.dy, 6)
       << ", \"dz\": " << format_double(sample.params.dz, 6) << "},\n";
    js << "  \"shapes\": {\"visible_points\": [" << sample.visible_points.size()
       << ", 3], \"voxel_counts\": [" << sample.voxel_counts.size()
       << "], \"coord_targets\": [" << sample.mask.coord_targets.size()
       << ", 3], \"density_targets\": [" << sample.mask.density_targets.size() << "]},\n";
    js << "  \"coord_targets_per_cell\": [";
    for (std::size_t i = 0; i < sample.mask.coord_targets_per_cell.size(); ++i) {
        if (i)
            js << ", ";
        js << sample.mask.coord_targets_per_cell[i];
    }
    js << "],\n";
    js << "  \"masked_cell_indices\": [";
    for (std::size_t i = 0; i < sample.mask.masked_cell_indices.size(); ++i) {
        if (i)
            js << ", ";
        js << "[" << sample.mask.masked_cell_indices[i][0] << ", "
           << sample.mask.masked_cell_indices[i][1] << "]";
    }
    js << "],\n";
    js << "  \"cropped_points\": " << sample.cropped_points << ",\n";
    js << "  \"bev_occupied\": " << sample.bev_occupied << "\n";
    js << "}\n";
    atomic_write_file(dir / (sample.sample_id + ".json"), js.str());
}

}  // namespace alspipe::maeprep
