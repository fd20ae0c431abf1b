#pragma once

#include "alspipe/ingest.hpp"
#include "alspipe/maeprep.hpp"
#include "alspipe/tiler.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace alspipe::config {

// TOML-subset document: [section] headers, key = value pairs, values being
// strings, integers, floats, booleans, or flat arrays of those. Comments
// with '#'. Enough for a declarative pipeline config; not a full TOML parser.
struct Value {
    std::variant<std::string, long long, double, bool, std::vector<Value>> data;

    std::string as_string() const;
    long long as_int() const;
    double as_double() const;
    bool as_bool() const;
    const std::vector<Value>& as_array() const;
};

using Section = std::map<std::string, Value>;
using Document = std::map<std::string, Section>;

Document parse_toml(const std::string& text);

struct PlanConfig {
    std::string dem;
    std::string landcover_dir;
    std::vector<int> nlcd_years = {2001, 2004, 2006, 2008, 2011, 2013, 2016, 2019, 2021};
    double patch_side = 500.0;
    std::size_t samples_per_project = 40;
    std::size_t cap = 40;
    std::vector<std::string> allowed_landcover = {"Developed", "Forest"};
    double slope_flat_max = 5.0;
    double slope_steep_min = 17.0;
    double utm_cell_size = 30.0;  // used when projecting geographic rasters
    std::string out = "out/manifest.jsonl";
};

struct FetchConfig {
    std::string manifest = "out/manifest.jsonl";
    std::string out = "out/tiles";
};

struct StatsConfig {
    std::string manifest = "out/manifest.jsonl";
    std::string tiles = "out/tiles";
    double subsample_fraction = 1.0;
    std::string out = "out/stats";
};

struct PrepConfig {
    std::string manifest = "out/manifest.jsonl";
    std::string tiles = "out/tiles";
    maeprep::PrepSpec spec;
    std::size_t samples_per_tile = 1;
    std::string out = "out/samples";
};

struct TileConfig {
    std::string tiles = "out/tiles";
    tiler::WindowSpec train_spec{100.0, 50.0, false};
    tiler::WindowSpec eval_spec{100.0, 100.0, false};
    std::array<double, 3> fractions = {0.6625, 0.16875, 0.16875};
    std::string labels;  // optional parent-id,label CSV passed through
    std::string out = "out/windows";
};

struct EvalConfig {
    std::string pred;
    std::string truth;
    std::size_t num_classes = 0;  // 0 = infer
    std::string out = "out/metrics.json";
};

struct PipelineConfig {
    std::uint64_t seed = 42;
    int workers = 8;
    ingest::FetchBackend backend;
    PlanConfig plan;
    FetchConfig fetch;
    StatsConfig stats;
    PrepConfig prep;
    TileConfig tile;
    EvalConfig eval;
};

PipelineConfig config_from_document(const Document& doc);
PipelineConfig load_config(const std::string& path);

// "section.key=value" override, same parsing rules as the file body.
void apply_override(PipelineConfig& cfg, const std::string& spec);

// Canonical serialization of every resolved value; two configs hash equal
// iff every effective setting matches.
std::string canonical_config(const PipelineConfig& cfg);
std::string config_hash(const PipelineConfig& cfg);

}  // namespace alspipe::config
