#include "alspipe/commands.hpp"

#include "alspipe/ingest.hpp"
#include "alspipe/maeprep.hpp"
#include "alspipe/metrics.hpp"
#include "alspipe/rng.hpp"
#include "alspipe/sampler.hpp"
#include "alspipe/sha256.hpp"
#include "alspipe/stats.hpp"
#include "alspipe/tiler.hpp"
#include "alspipe/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

namespace alspipe::commands {

namespace {

namespace fs = std::filesystem;
using config::PipelineConfig;

// Append-only JSONL run log next to the command outputs.
class RunLog {
public:
    RunLog(const fs::path& dir, const std::string& cmd, const PipelineConfig& cfg) {
        fs::create_directories(dir);
        path_ = dir / "run_log.jsonl";
        cmd_ = cmd;
        event("start", {{"config_hash", config::config_hash(cfg)},
                        {"seed", std::to_string(cfg.seed)}});
    }

    void event(const std::string& name, const std::vector<std::pair<std::string, std::string>>& kv) {
        std::ostringstream line;
        line << "{\"cmd\":\"" << cmd_ << "\",\"event\":\"" << name << "\",\"ts\":"
             << std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count();
        for (const auto& [k, v] : kv) {
            line << ",\"" << k << "\":";
            const bool numeric = !v.empty() && v.find_first_not_of("-0123456789.") == std::string::npos;
            if (numeric)
                line << v;
            else
                line << '"' << v << '"';
        }
        line << "}\n";
        std::lock_guard lock(mutex_);
        std::ofstream out(path_, std::ios::app);
        out << line.str();
    }

private:
    fs::path path_;
    std::string cmd_;
    std::mutex mutex_;
};

std::uint64_t derive_seed(std::uint64_t base, const std::string& salt) {
    const std::string hex = sha256_hex(std::to_string(base) + "/" + salt);
    std::uint64_t value = 0;
    for (int i = 0; i < 16; ++i) {
        const char c = hex[i];
        value = value * 16 + static_cast<std::uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
    }
    return value;
}

raster::CrsTag utm_tag(int zone, geo::Hemisphere hemisphere) {
    return {raster::CrsTag::Kind::Utm, zone, hemisphere};
}

fs::path find_landcover_file(const std::string& dir, int year) {
    const fs::path base(dir);
    for (const char* ext : {".asc", ".tif", ".tiff"}) {
        const fs::path candidate = base / ("nlcd_" + std::to_string(year) + ext);
        if (fs::exists(candidate))
            return candidate;
    }
    throw std::runtime_error("no land cover raster for year " + std::to_string(year) + " under " +
                             dir);
}

void print_summary_table(std::ostream& out, const std::map<sampler::JointKey, std::size_t>& counts) {
    std::set<raster::LandCoverL1> landcovers;
    for (const auto& [key, n] : counts)
        landcovers.insert(key.landcover);
    if (landcovers.empty()) {
        out << "  (no tiles selected)\n";
        return;
    }

    static constexpr std::array<raster::SlopeClass, 3> kSlopes = {
        raster::SlopeClass::Flat, raster::SlopeClass::Sloped, raster::SlopeClass::Steep};

    out << std::left << std::setw(8) << "";
    for (const auto lc : landcovers)
        out << std::right << std::setw(12) << raster::to_string(lc);
    out << std::right << std::setw(12) << "All" << "\n";

    std::map<raster::LandCoverL1, std::size_t> col_totals;
    std::size_t grand = 0;
    for (const auto slope : kSlopes) {
        out << std::left << std::setw(8) << raster::to_string(slope);
        std::size_t row_total = 0;
        for (const auto lc : landcovers) {
            std::size_t n = 0;
            if (const auto it = counts.find({lc, slope}); it != counts.end())
                n = it->second;
            row_total += n;
            col_totals[lc] += n;
            out << std::right << std::setw(12) << n;
        }
        grand += row_total;
        out << std::right << std::setw(12) << row_total << "\n";
    }
    out << std::left << std::setw(8) << "All";
    for (const auto lc : landcovers)
        out << std::right << std::setw(12) << col_totals[lc];
    out << std::right << std::setw(12) << grand << "\n";
}

// Shared jsonl index entry for fetched tiles and cut windows.
struct TileIndexEntry {
    std::string path;  // relative to the index file, empty when no file exists
    sampler::ManifestEntry entry;
    std::uint64_t points = 0;
    bool empty = false;
};

std::string tile_index_line(const TileIndexEntry& e) {
    std::ostringstream out;
    out << "{\"path\":\"" << e.path << "\",\"project_id\":\"" << e.entry.project_id << "\""
        << ",\"epsg\":" << e.entry.epsg << ",\"minx\":" << format_double(e.entry.bbox.minx, 3)
        << ",\"miny\":" << format_double(e.entry.bbox.miny, 3)
        << ",\"maxx\":" << format_double(e.entry.bbox.maxx, 3)
        << ",\"maxy\":" << format_double(e.entry.bbox.maxy, 3) << ",\"landcover\":\""
        << raster::to_string(e.entry.landcover) << "\",\"slope\":\""
        << raster::to_string(e.entry.slope) << "\",\"nlcd_year\":" << e.entry.nlcd_year
        << ",\"points\":" << e.points << ",\"empty\":" << (e.empty ? "true" : "false") << "}\n";
    return out.str();
}

std::vector<TileIndexEntry> read_tile_index(const fs::path& index_path) {
    const std::string text = read_text_file(index_path);
    std::vector<TileIndexEntry> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto doc = nlohmann::json::parse(line);
        TileIndexEntry e;
        e.path = doc.at("path").get<std::string>();
        e.entry.project_id = doc.at("project_id").get<std::string>();
        e.entry.epsg = doc.at("epsg").get<int>();
        e.entry.bbox.minx = doc.at("minx").get<double>();
        e.entry.bbox.miny = doc.at("miny").get<double>();
        e.entry.bbox.maxx = doc.at("maxx").get<double>();
        e.entry.bbox.maxy = doc.at("maxy").get<double>();
        e.entry.landcover = raster::landcover_from_string(doc.at("landcover").get<std::string>());
        e.entry.slope = raster::slope_from_string(doc.at("slope").get<std::string>());
        e.entry.nlcd_year = doc.at("nlcd_year").get<int>();
        e.points = doc.at("points").get<std::uint64_t>();
        e.empty = doc.at("empty").get<bool>();
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

int run_plan(const PipelineConfig& cfg, std::ostream& out) {
    const fs::path manifest_path(cfg.plan.out);
    const fs::path out_dir = manifest_path.has_parent_path() ? manifest_path.parent_path()
                                                             : fs::path(".");
    RunLog log(out_dir, "plan", cfg);

    std::set<raster::LandCoverL1> allowed;
    for (const auto& name : cfg.plan.allowed_landcover)
        allowed.insert(raster::landcover_from_string(name));

    ingest::ProjectListing listing;
    try {
        listing = ingest::list_projects(cfg.backend);
    } catch (const std::exception& e) {
        out << "plan: cannot list projects: " << e.what() << "\n";
        log.event("fatal", {{"error", e.what()}});
        return 1;
    }
    for (const auto& warning : listing.warnings) {
        out << "warning: " << warning << "\n";
        log.event("warning", {{"message", warning}});
    }

    std::vector<sampler::ProjectSelection> selections(listing.projects.size());
    std::vector<std::string> failures(listing.projects.size());

    parallel_for(listing.projects.size(), cfg.workers, [&](std::size_t i) {
        const ingest::ProjectInfo& project = listing.projects[i];
        try {
            const geo::Vec2 center = geo::centroid(project.boundary);
            const geo::GeoPoint center_pt{center.x, center.y};
            const int zone = geo::utm_zone_of(center_pt);
            const geo::Hemisphere hemisphere =
                center.y < 0.0 ? geo::Hemisphere::South : geo::Hemisphere::North;

            const int year = sampler::select_nlcd_year(project.capture_year, cfg.plan.nlcd_years);

            raster::RasterGrid landcover =
                raster::parse_raster_file(find_landcover_file(cfg.plan.landcover_dir, year));
            raster::RasterGrid dem = raster::parse_raster_file(cfg.plan.dem);

            geo::MultiPolygon boundary_utm;
            if (landcover.crs().kind == raster::CrsTag::Kind::Geographic ||
                std::abs(landcover.origin_x()) <= 360.0) {
                // Degrees in, meters out: project both rasters and the boundary.
                raster::RasterGrid geo_lc(landcover.width(), landcover.height(),
                                          landcover.origin_x(), landcover.origin_y(),
                                          landcover.cell_size(), landcover.nodata(),
                                          {raster::CrsTag::Kind::Geographic, 0,
                                           geo::Hemisphere::North});
                std::copy(landcover.band().begin(), landcover.band().end(), geo_lc.band().begin());
                raster::RasterGrid geo_dem(dem.width(), dem.height(), dem.origin_x(),
                                           dem.origin_y(), dem.cell_size(), dem.nodata(),
                                           {raster::CrsTag::Kind::Geographic, 0,
                                            geo::Hemisphere::North});
                std::copy(dem.band().begin(), dem.band().end(), geo_dem.band().begin());
                landcover = raster::project_to_utm(geo_lc, zone, hemisphere, cfg.plan.utm_cell_size);
                dem = raster::project_to_utm(geo_dem, zone, hemisphere, cfg.plan.utm_cell_size);
            } else {
                // Pre-warped metric rasters; tag them with the project zone.
                raster::RasterGrid lc_utm(landcover.width(), landcover.height(),
                                          landcover.origin_x(), landcover.origin_y(),
                                          landcover.cell_size(), landcover.nodata(),
                                          utm_tag(zone, hemisphere));
                std::copy(landcover.band().begin(), landcover.band().end(), lc_utm.band().begin());
                landcover = std::move(lc_utm);
                raster::RasterGrid dem_utm(dem.width(), dem.height(), dem.origin_x(),
                                           dem.origin_y(), dem.cell_size(), dem.nodata(),
                                           utm_tag(zone, hemisphere));
                std::copy(dem.band().begin(), dem.band().end(), dem_utm.band().begin());
                dem = std::move(dem_utm);
            }
            boundary_utm = geo::project_to_utm(project.boundary, zone, hemisphere);

            const raster::RasterGrid lc_cropped = raster::crop_to_polygon(landcover, boundary_utm);
            const raster::RasterGrid dem_cropped = raster::crop_to_polygon(dem, boundary_utm);

            const raster::RasterGrid slope = raster::slope_degrees(dem_cropped);
            raster::RasterGrid slope_cls =
                raster::classify_slope(slope, cfg.plan.slope_flat_max, cfg.plan.slope_steep_min);
            const raster::RasterGrid level1 = raster::to_level1_grid(lc_cropped);

            if (slope_cls.width() != level1.width() || slope_cls.height() != level1.height() ||
                slope_cls.origin_x() != level1.origin_x() ||
                slope_cls.origin_y() != level1.origin_y() ||
                slope_cls.cell_size() != level1.cell_size())
                slope_cls = raster::resample_nearest(slope_cls, level1);

            const sampler::LabelResult labeled =
                sampler::label_patches(level1, slope_cls, boundary_utm, cfg.plan.patch_side,
                                       project.project_id, year);
            log.event("project_labeled",
                      {{"project", project.project_id},
                       {"patches", std::to_string(labeled.labels.size())},
                       {"dropped_outside", std::to_string(labeled.dropped_outside)},
                       {"dropped_nodata", std::to_string(labeled.dropped_nodata)}});

            sampler::ProjectSelection selection;
            selection.project_id = project.project_id;
            selection.epsg = geo::epsg_code(zone, hemisphere);
            selection.source_url = project.source_url;
            if (!labeled.labels.empty()) {
                const auto dist = sampler::joint_distribution(labeled.labels);
                selection.selected = sampler::inverse_probability_sample(
                    labeled.labels, dist, cfg.plan.samples_per_project,
                    derive_seed(cfg.seed, project.project_id), allowed);
            }
            selections[i] = std::move(selection);
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    std::size_t failed = 0;
    std::vector<sampler::ProjectSelection> ok;
    for (std::size_t i = 0; i < selections.size(); ++i) {
        if (!failures[i].empty()) {
            failed++;
            out << "plan: project " << listing.projects[i].project_id << " failed: " << failures[i]
                << "\n";
            log.event("project_failed",
                      {{"project", listing.projects[i].project_id}, {"error", failures[i]}});
            continue;
        }
        ok.push_back(std::move(selections[i]));
    }

    if (!listing.projects.empty() && failed == listing.projects.size()) {
        log.event("fatal", {{"error", "all projects failed"}});
        return 1;
    }

    const sampler::SampleManifest manifest = sampler::build_manifest(ok, cfg.plan.cap, cfg.seed);
    atomic_write_file(manifest_path, sampler::manifest_to_jsonl(manifest));
    const fs::path summary_path = manifest_path.string() + ".summary.json";
    atomic_write_file(summary_path, sampler::manifest_summary_json(manifest));

    if (manifest.entries.empty())
        out << "warning: empty manifest (no candidates after the land-cover filter)\n";
    out << "plan: " << manifest.entries.size() << " tiles across " << ok.size() << " projects -> "
        << manifest_path.string() << "\n";
    print_summary_table(out, manifest.summary());

    log.event("done", {{"entries", std::to_string(manifest.entries.size())},
                       {"projects_failed", std::to_string(failed)}});
    return failed == 0 ? 0 : 2;
}

int run_fetch(const PipelineConfig& cfg, std::ostream& out) {
    const fs::path out_dir(cfg.fetch.out);
    RunLog log(out_dir, "fetch", cfg);

    sampler::SampleManifest manifest;
    try {
        manifest = sampler::parse_manifest_jsonl(read_text_file(cfg.fetch.manifest));
    } catch (const std::exception& e) {
        out << "fetch: cannot read manifest: " << e.what() << "\n";
        log.event("fatal", {{"error", e.what()}});
        return 1;
    }

    std::map<std::string, std::size_t> per_project_seq;
    std::vector<std::string> names(manifest.entries.size());
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto seq = per_project_seq[manifest.entries[i].project_id]++;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "tile_%05zu.las", seq);
        names[i] = manifest.entries[i].project_id + "/" + buf;
    }

    std::vector<TileIndexEntry> index(manifest.entries.size());
    std::vector<std::string> failures(manifest.entries.size());

    ingest::FetchBackend backend = cfg.backend;
    if (backend.cache_dir.empty())
        backend.cache_dir = out_dir / "cache";

    const int fetch_workers = std::min(cfg.workers, backend.workers);
    parallel_for(manifest.entries.size(), fetch_workers, [&](std::size_t i) {
        const sampler::ManifestEntry& entry = manifest.entries[i];
        try {
            const pointcloud::PointTile tile = ingest::fetch_tile(backend, entry);
            TileIndexEntry ie;
            ie.entry = entry;
            ie.points = tile.points.size();
            ie.empty = tile.points.empty();
            if (!tile.points.empty()) {
                const auto bytes = pointcloud::write_las(tile);
                atomic_write_file(out_dir / names[i], bytes);
                ie.path = names[i];
            }
            index[i] = std::move(ie);
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });

    std::size_t failed = 0;
    std::ostringstream index_text;
    std::ostringstream failure_list;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (!failures[i].empty()) {
            failed++;
            out << "fetch: entry " << i << " (" << manifest.entries[i].project_id
                << ") failed: " << failures[i] << "\n";
            log.event("entry_failed", {{"index", std::to_string(i)}, {"error", failures[i]}});
            if (failed > 1)
                failure_list << ",";
            failure_list << "{\"index\":" << i << ",\"project_id\":\""
                         << manifest.entries[i].project_id << "\"}";
            continue;
        }
        index_text << tile_index_line(index[i]);
    }
    atomic_write_file(out_dir / "index.jsonl", index_text.str());

    std::ostringstream summary;
    summary << "{\"entries\":" << manifest.entries.size() << ",\"fetched\":"
            << manifest.entries.size() - failed << ",\"failed\":" << failed << ",\"failures\":["
            << failure_list.str() << "]}\n";
    atomic_write_file(out_dir / "fetch_summary.json", summary.str());

    out << "fetch: " << manifest.entries.size() - failed << "/" << manifest.entries.size()
        << " tiles -> " << out_dir.string() << "\n";
    log.event("done", {{"fetched", std::to_string(manifest.entries.size() - failed)},
                       {"failed", std::to_string(failed)}});
    if (manifest.entries.empty())
        return 0;
    if (failed == manifest.entries.size())
        return 1;
    return failed == 0 ? 0 : 2;
}

int run_stats(const PipelineConfig& cfg, std::ostream& out) {
    const fs::path out_dir(cfg.stats.out);
    RunLog log(out_dir, "stats", cfg);

    std::vector<TileIndexEntry> index;
    try {
        index = read_tile_index(fs::path(cfg.stats.tiles) / "index.jsonl");
    } catch (const std::exception& e) {
        out << "stats: cannot read tile index: " << e.what() << "\n";
        log.event("fatal", {{"error", e.what()}});
        return 1;
    }

    // Optional random subset of the tile set for analysis.
    if (cfg.stats.subsample_fraction < 1.0) {
        sampler::SampleManifest as_manifest;
        for (const auto& e : index)
            as_manifest.entries.push_back(e.entry);
        const auto subset = stats::subsample_tiles(as_manifest, cfg.stats.subsample_fraction,
                                                   cfg.seed);
        std::set<std::string> keys;
        for (const auto& e : subset.entries)
            keys.insert(e.project_id + "|" + format_double(e.bbox.minx, 3) + "|" +
                        format_double(e.bbox.miny, 3));
        std::vector<TileIndexEntry> filtered;
        for (auto& e : index) {
            if (keys.contains(e.entry.project_id + "|" + format_double(e.entry.bbox.minx, 3) +
                              "|" + format_double(e.entry.bbox.miny, 3)))
                filtered.push_back(std::move(e));
        }
        index = std::move(filtered);
        log.event("subsampled", {{"tiles", std::to_string(index.size())}});
    }

    std::vector<stats::TileStats> tile_stats(index.size());
    std::vector<bool> usable(index.size(), false);
    std::vector<std::string> failures(index.size());

    parallel_for(index.size(), cfg.workers, [&](std::size_t i) {
        const TileIndexEntry& e = index[i];
        if (e.empty)
            return;  // zero-point tiles carry no stats
        try {
            const auto bytes = read_binary_file(fs::path(cfg.stats.tiles) / e.path);
            pointcloud::PointTile tile = pointcloud::parse_las(bytes);
            tile.bounds = e.entry.bbox;  // density over the nominal patch area
            tile_stats[i] = stats::tile_stats(tile);
            usable[i] = true;
        } catch (const std::exception& ex) {
            failures[i] = ex.what();
        }
    });

    std::vector<stats::TileStats> kept;
    std::vector<sampler::JointKey> labels;
    std::vector<std::string> ids;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (!failures[i].empty()) {
            failed++;
            out << "stats: tile " << index[i].path << " failed: " << failures[i] << "\n";
            log.event("tile_failed", {{"path", index[i].path}, {"error", failures[i]}});
            continue;
        }
        if (!usable[i])
            continue;
        kept.push_back(tile_stats[i]);
        labels.push_back({index[i].entry.landcover, index[i].entry.slope});
        ids.push_back(index[i].path);
    }

    if (kept.empty()) {
        out << "stats: no usable tiles\n";
        log.event("fatal", {{"error", "no usable tiles"}});
        return 1;
    }

    const stats::GroupedStats grouped = stats::aggregate(kept, labels);
    atomic_write_file(out_dir / "report.json", stats::report_json(grouped));
    atomic_write_file(out_dir / "tiles.csv", stats::tiles_csv(ids, kept, labels));

    out << "stats: " << kept.size() << " tiles, mean density "
        << format_double(grouped.all.density.mean, 2) << " pts/m^2 -> " << out_dir.string()
        << "\n";
    log.event("done", {{"tiles", std::to_string(kept.size())},
                       {"failed", std::to_string(failed)}});
    return failed == 0 ? 0 : 2;
}

int run_prep(const PipelineConfig& cfg, std::ostream& out) {
    const fs::path out_dir(cfg.prep.out);
    RunLog log(out_dir, "prep", cfg);

    std::vector<TileIndexEntry> index;
    try {
        index = read_tile_index(fs::path(cfg.prep.tiles) / "index.jsonl");
    } catch (const std::exception& e) {
        out << "prep: cannot read tile index: " << e.what() << "\n";
        log.event("fatal", {{"error", e.what()}});
        return 1;
    }

    struct Task {
        std::size_t tile_index;
        std::string sample_id;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i].empty)
            continue;
        for (std::size_t k = 0; k < cfg.prep.samples_per_tile; ++k) {
            std::string stem = index[i].path;
            std::replace(stem.begin(), stem.end(), '/', '_');
            if (stem.size() > 4 && stem.ends_with(".las"))
                stem.resize(stem.size() - 4);
            Task task;
            task.tile_index = i;
            task.sample_id = stem + "_s" + std::to_string(k);
            task.seed = derive_seed(cfg.seed, task.sample_id);
            tasks.push_back(std::move(task));
        }
    }

    std::vector<std::string> manifest_lines(tasks.size());
    std::vector<std::string> failures(tasks.size());

    parallel_for(tasks.size(), cfg.workers, [&](std::size_t t) {
        const Task& task = tasks[t];
        const TileIndexEntry& e = index[task.tile_index];
        try {
            const auto bytes = read_binary_file(fs::path(cfg.prep.tiles) / e.path);
            pointcloud::PointTile tile = pointcloud::parse_las(bytes);
            tile.bounds = e.entry.bbox;
            const maeprep::PreparedSample sample =
                maeprep::prepare_sample(tile, cfg.prep.spec, task.seed, task.sample_id);
            maeprep::write_sample(out_dir, sample, cfg.prep.spec);

            std::ostringstream line;
            line << "{\"sample_id\":\"" << sample.sample_id << "\",\"source\":\"" << e.path
                 << "\",\"seed\":" << sample.seed << ",\"visible_points\":"
                 << sample.visible_points.size() << ",\"masked_cells\":"
                 << sample.mask.masked_cell_indices.size() << ",\"bev_occupied\":"
                 << sample.bev_occupied << "}\n";
            manifest_lines[t] = line.str();
        } catch (const std::exception& ex) {
            failures[t] = ex.what();
        }
    });

    std::size_t failed = 0;
    std::ostringstream manifest_text;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (!failures[t].empty()) {
            failed++;
            out << "prep: sample " << tasks[t].sample_id << " failed: " << failures[t] << "\n";
            log.event("sample_failed", {{"sample", tasks[t].sample_id}, {"error", failures[t]}});
            continue;
        }
        manifest_text << manifest_lines[t];
    }
    atomic_write_file(out_dir / "MANIFEST.jsonl", manifest_text.str());

    out << "prep: " << tasks.size() - failed << "/" << tasks.size() << " samples -> "
        << out_dir.string() << "\n";
    log.event("done", {{"samples", std::to_string(tasks.size() - failed)},
                       {"failed", std::to_string(failed)}});
    if (tasks.empty())
        return 0;
    if (failed == tasks.size())
        return 1;
    return failed == 0 ? 0 : 2;
}

int run_tile(const PipelineConfig& cfg, std::ostream& out) {
    const fs::path out_dir(cfg.tile.out);
    RunLog log(out_dir, "tile", cfg);

    std::vector<TileIndexEntry> index;
    try {
        index = read_tile_index(fs::path(cfg.tile.tiles) / "index.jsonl");
    } catch (const std::exception& e) {
        out << "tile: cannot read tile index: " << e.what() << "\n";
        log.event("fatal", {{"error", e.what()}});
        return 1;
    }

    // Optional parent-id -> scene label pass-through.
    std::map<std::string, std::string> parent_labels;
    if (!cfg.tile.labels.empty()) {
        std::istringstream in(read_text_file(cfg.tile.labels));
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
                line.pop_back();
            const auto comma = line.find(',');
            if (comma == std::string::npos || line.empty())
                continue;
            parent_labels[line.substr(0, comma)] = line.substr(comma + 1);
        }
    }

    std::vector<std::string> parent_ids;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto& e = index[i];
        std::string id =
            e.path.empty() ? e.entry.project_id + "_entry" + std::to_string(i) : e.path;
        if (id.size() > 4 && id.ends_with(".las"))
            id.resize(id.size() - 4);
        std::replace(id.begin(), id.end(), '/', '_');
        parent_ids.push_back(std::move(id));
    }
    if (parent_ids.empty()) {
        out << "tile: no parent tiles\n";
        log.event("fatal", {{"error", "no parent tiles"}});
        return 1;
    }

    const tiler::SplitAssignment assignment =
        tiler::split(parent_ids, cfg.tile.fractions, cfg.seed);

    std::vector<std::string> index_lines(index.size());
    std::vector<std::string> failures(index.size());

    parallel_for(index.size(), cfg.workers, [&](std::size_t i) {
        const TileIndexEntry& e = index[i];
        if (e.empty || e.path.empty())
            return;
        try {
            const auto bytes = read_binary_file(fs::path(cfg.tile.tiles) / e.path);
            pointcloud::PointTile parent = pointcloud::parse_las(bytes);
            parent.bounds = e.entry.bbox;

            const tiler::Split split = assignment.assignment.at(parent_ids[i]);
            const tiler::WindowSpec& spec =
                split == tiler::Split::Train ? cfg.tile.train_spec : cfg.tile.eval_spec;
            const auto cuts = tiler::cut(parent, spec);

            std::ostringstream lines;
            const std::string label =
                parent_labels.contains(parent_ids[i]) ? parent_labels.at(parent_ids[i]) : "";
            for (const auto& cut : cuts) {
                std::string rel;
                if (!cut.empty) {
                    char name[32];
                    std::snprintf(name, sizeof(name), "%d_%d.las", cut.row, cut.col);
                    rel = std::string(tiler::to_string(split)) + "/" + parent_ids[i] + "/" + name;
                    atomic_write_file(out_dir / rel, pointcloud::write_las(cut.tile));
                }
                lines << "{\"split\":\"" << tiler::to_string(split) << "\",\"parent_id\":\""
                      << parent_ids[i] << "\",\"row\":" << cut.row << ",\"col\":" << cut.col
                      << ",\"minx\":" << format_double(cut.bbox.minx, 3)
                      << ",\"miny\":" << format_double(cut.bbox.miny, 3)
                      << ",\"maxx\":" << format_double(cut.bbox.maxx, 3)
                      << ",\"maxy\":" << format_double(cut.bbox.maxy, 3)
                      << ",\"points\":" << cut.tile.points.size()
                      << ",\"empty\":" << (cut.empty ? "true" : "false") << ",\"path\":\"" << rel
                      << "\",\"label\":\"" << label << "\"}\n";
            }
            index_lines[i] = lines.str();
        } catch (const std::exception& ex) {
            failures[i] = ex.what();
        }
    });

    std::size_t failed = 0;
    std::ostringstream index_text;
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (!failures[i].empty()) {
            failed++;
            out << "tile: parent " << parent_ids[i] << " failed: " << failures[i] << "\n";
            log.event("parent_failed", {{"parent", parent_ids[i]}, {"error", failures[i]}});
            continue;
        }
        index_text << index_lines[i];
    }
    atomic_write_file(out_dir / "index.jsonl", index_text.str());

    out << "tile: " << index.size() - failed << "/" << index.size() << " parents (train/val/test "
        << assignment.sizes[0] << "/" << assignment.sizes[1] << "/" << assignment.sizes[2]
        << ") -> " << out_dir.string() << "\n";
    log.event("done", {{"parents", std::to_string(index.size() - failed)},
                       {"failed", std::to_string(failed)}});
    if (failed == index.size())
        return 1;
    return failed == 0 ? 0 : 2;
}

int run_eval(const PipelineConfig& cfg, std::ostream& out) {
    const fs::path out_path(cfg.eval.out);
    const fs::path out_dir = out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
    RunLog log(out_dir, "eval", cfg);

    try {
        const auto pred = metrics::read_labels(read_text_file(cfg.eval.pred));
        const auto truth = metrics::read_labels(read_text_file(cfg.eval.truth));
        if (pred.size() != truth.size())
            throw std::runtime_error("pred and truth have different item counts (" +
                                     std::to_string(pred.size()) + " vs " +
                                     std::to_string(truth.size()) + ")");
        std::vector<int> pred_labels(pred.size()), truth_labels(truth.size());
        int max_label = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (pred[i].first != truth[i].first)
                throw std::runtime_error("id mismatch at item " + std::to_string(i) + ": '" +
                                         pred[i].first + "' vs '" + truth[i].first + "'");
            pred_labels[i] = pred[i].second;
            truth_labels[i] = truth[i].second;
            max_label = std::max({max_label, pred[i].second, truth[i].second});
        }
        const std::size_t classes =
            cfg.eval.num_classes > 0 ? cfg.eval.num_classes
                                     : static_cast<std::size_t>(max_label) + 1;

        const auto counts = metrics::accumulate(pred_labels, truth_labels, classes);
        const std::string report = metrics::report_json(counts);
        atomic_write_file(out_path, report);
        out << report;
        log.event("done", {{"items", std::to_string(counts.total)}});
        return 0;
    } catch (const std::exception& e) {
        out << "eval: " << e.what() << "\n";
        log.event("fatal", {{"error", e.what()}});
        return 1;
    }
}

}  // namespace alspipe::commands
