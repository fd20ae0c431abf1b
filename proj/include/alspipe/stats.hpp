#pragma once

#include "alspipe/pointcloud.hpp"
#include "alspipe/sampler.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace alspipe::stats {

using sampler::JointKey;

// Return-number categories as tabulated in ALS return analyses. Categories
// overlap by definition: First = Single + FirstOfMany, Last = Single +
// LastOfMany. Returns past the 7th (legal in LAS 1.4) land in Other;
// records with rn < 1 or rn > nr land in Anomalous.
enum class ReturnCategory {
    Single,
    First,
    FirstOfMany,
    Second,
    Third,
    Fourth,
    Fifth,
    Sixth,
    Seventh,
    Last,
    LastOfMany,
    Other,
    Anomalous,
};

inline constexpr std::size_t kReturnCategoryCount = 13;
using ReturnTable = std::array<std::uint64_t, kReturnCategoryCount>;

std::string_view to_string(ReturnCategory c);

struct TileStats {
    double density = 0.0;            // points per square meter
    double ground_std = 0.0;         // population std of z over class-2 points
    bool ground_std_defined = false; // false when the tile has no ground points
    ReturnTable returns{};
    std::uint64_t point_count = 0;
    std::uint64_t ground_count = 0;
};

TileStats tile_stats(const pointcloud::PointTile& tile);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population
    std::size_t n = 0;
};

struct CellStats {
    std::size_t tile_count = 0;
    MeanStd density;
    MeanStd ground_std;
    std::size_t ground_excluded = 0;  // tiles without ground points
    ReturnTable returns{};
    std::uint64_t total_points = 0;

    double return_percent(ReturnCategory c) const;
};

struct GroupedStats {
    std::map<JointKey, CellStats> cells;
    std::map<raster::LandCoverL1, CellStats> landcover_marginal;
    std::map<raster::SlopeClass, CellStats> slope_marginal;
    CellStats all;
};

// stats[i] belongs to joint class labels[i]; marginals are aggregated over
// the raw tile lists, not over cell means.
GroupedStats aggregate(const std::vector<TileStats>& stats, const std::vector<JointKey>& labels);

// Uniform sample without replacement of round(fraction * N) entries,
// original order preserved. fraction in (0, 1].
sampler::SampleManifest subsample_tiles(const sampler::SampleManifest& manifest, double fraction,
                                        std::uint64_t seed);

std::string report_json(const GroupedStats& grouped);
std::string tiles_csv(const std::vector<std::string>& ids, const std::vector<TileStats>& stats,
                      const std::vector<JointKey>& labels);

}  // namespace alspipe::stats
