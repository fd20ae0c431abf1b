#pragma once

#include "alspipe/geo.hpp"
#include "alspipe/pointcloud.hpp"
#include "alspipe/sampler.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace alspipe::ingest {

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{500};
    double factor = 2.0;
    bool jitter = true;
};

struct FetchBackend {
    enum class Kind { Local, Http };

    Kind kind = Kind::Local;
    // Local: corpus directory. Http: base URL such as http://host:port/corpus.
    std::string root;
    RetryPolicy retry;
    std::filesystem::path cache_dir;
    // Optional LAZ hook, e.g. "laszip -i {in} -o {out}"; when empty, LAZ
    // sources are rejected.
    std::string decompress_cmd;
    int workers = 8;
    // Used when a project carries no capture_year metadata; 0 keeps such
    // projects excluded.
    int default_capture_year = 0;
};

struct ProjectInfo {
    std::string project_id;
    geo::MultiPolygon boundary;  // WGS84 lon/lat
    int capture_year = 0;
    std::string source_url;
};

struct ProjectListing {
    std::vector<ProjectInfo> projects;  // sorted by project_id
    std::size_t skipped = 0;
    std::vector<std::string> warnings;
};

// Corpus layout per project: boundary.geojson, metadata.json (capture_year),
// pointcloud.las. The HTTP flavor lists projects via {root}/index.json.
ProjectListing list_projects(const FetchBackend& backend);

// Retrieves the project's full source file (HTTP: streamed into the cache,
// resumable via Range requests, retried with backoff) and crops it to the
// entry bbox. Cropped tiles are cached under a (project, bbox) content key;
// repeat calls are served from the cache byte-identically.
pointcloud::PointTile fetch_tile(const FetchBackend& backend, const sampler::ManifestEntry& entry);

struct FetchTrace {
    int http_attempts = 0;
    bool tile_cache_hit = false;
    bool source_cache_hit = false;
};

pointcloud::PointTile fetch_tile(const FetchBackend& backend, const sampler::ManifestEntry& entry,
                                 FetchTrace& trace);

}  // namespace alspipe::ingest
