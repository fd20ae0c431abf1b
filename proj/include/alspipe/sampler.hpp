#pragma once

#include "alspipe/pointcloud.hpp"
#include "alspipe/raster.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace alspipe::sampler {

using raster::LandCoverL1;
using raster::SlopeClass;

struct JointKey {
    LandCoverL1 landcover = LandCoverL1::Water;
    SlopeClass slope = SlopeClass::Flat;
    auto operator<=>(const JointKey&) const = default;
};

struct PatchLabel {
    pointcloud::Bounds bbox;  // UTM meters
    LandCoverL1 landcover = LandCoverL1::Water;
    SlopeClass slope = SlopeClass::Flat;
    std::string project_id;
    int nlcd_year = 0;

    JointKey joint() const { return {landcover, slope}; }
};

struct JointDistribution {
    std::map<JointKey, std::size_t> counts;
    std::size_t total = 0;

    double probability(const JointKey& key) const;
};

// Exact capture-year match when available, otherwise the nearest year; ties
// resolve to the later year.
int select_nlcd_year(int capture_year, const std::vector<int>& available);

struct LabelResult {
    std::vector<PatchLabel> labels;
    std::size_t dropped_outside = 0;  // patch center outside the boundary
    std::size_t dropped_nodata = 0;   // more than half the cells nodata
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
};

// Divides the co-registered class grids into patch_side x patch_side patches
// anchored at the grid's upper-left corner and labels each with the modal
// land-cover and slope class. Both grids must share geometry and CRS.
LabelResult label_patches(const raster::RasterGrid& landcover_l1,
                          const raster::RasterGrid& slope_class, const geo::MultiPolygon& boundary,
                          double patch_side, const std::string& project_id, int nlcd_year);

JointDistribution joint_distribution(const std::vector<PatchLabel>& labels);

inline const std::set<LandCoverL1> kDefaultAllowedLandcover = {LandCoverL1::Developed,
                                                               LandCoverL1::Forest};

// Weighted sampling without replacement: candidates restricted to
// allowed_landcover, each weighted 1/p(joint class) with p taken over the
// restricted pool, drawn by Efraimidis-Spirakis keys. Returns all candidates
// when fewer than n remain. Deterministic per seed.
std::vector<PatchLabel> inverse_probability_sample(
    const std::vector<PatchLabel>& labels, const JointDistribution& dist, std::size_t n,
    std::uint64_t seed, const std::set<LandCoverL1>& allowed_landcover = kDefaultAllowedLandcover);

struct ManifestEntry {
    std::string project_id;
    int epsg = 0;
    pointcloud::Bounds bbox;
    LandCoverL1 landcover = LandCoverL1::Water;
    SlopeClass slope = SlopeClass::Flat;
    int nlcd_year = 0;
    std::string source_url;
};

struct SampleManifest {
    std::vector<ManifestEntry> entries;
    std::uint64_t seed = 0;

    std::map<JointKey, std::size_t> summary() const;
};

struct ProjectSelection {
    std::string project_id;
    int epsg = 0;
    std::string source_url;
    std::vector<PatchLabel> selected;
};

// Caps each project's entries, merges in project-id order, and validates that
// no bbox repeats within a project.
SampleManifest build_manifest(const std::vector<ProjectSelection>& per_project, std::size_t cap,
                              std::uint64_t seed);

// JSON Lines, one entry per line, coordinates with 3 decimals. Byte-stable
// for identical inputs.
std::string manifest_to_jsonl(const SampleManifest& manifest);
SampleManifest parse_manifest_jsonl(std::string_view text);

// Sidecar summary: count matrix over (landcover, slope) plus marginals.
std::string manifest_summary_json(const SampleManifest& manifest);

}  // namespace alspipe::sampler
