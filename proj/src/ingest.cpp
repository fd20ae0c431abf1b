#include "alspipe/ingest.hpp"

#include "alspipe/rng.hpp"
#include "alspipe/sha256.hpp"
#include "alspipe/util.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace alspipe::ingest {

namespace {

namespace fs = std::filesystem;

int capture_year_from_metadata(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    return doc.at("capture_year").get<int>();
}

std::string source_url_from_metadata(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    if (doc.contains("source_url"))
        return doc.at("source_url").get<std::string>();
    return {};
}

struct HttpTarget {
    std::string base;    // scheme://host[:port]
    std::string prefix;  // leading path, possibly empty
};

HttpTarget split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw std::runtime_error("HTTP backend root must be a URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos)
        return {url, ""};
    return {url.substr(0, path_start), url.substr(path_start)};
}

void backoff_sleep(const RetryPolicy& retry, int attempt) {
    double ms = static_cast<double>(retry.backoff_base.count());
    for (int i = 0; i < attempt; ++i)
        ms *= retry.factor;
    if (retry.jitter) {
        Rng rng(static_cast<std::uint64_t>(
            std::chrono::steady_clock::now().time_since_epoch().count()));
        ms *= uniform_range(rng, 0.5, 1.5);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(ms)));
}

// GET into a string; nullopt-like via the bool. 404 reported distinctly so
// optional resources (digest sidecars) can be skipped.
struct HttpResult {
    bool ok = false;
    bool not_found = false;
    std::string body;
    std::string error;
};

HttpResult http_get(const HttpTarget& target, const std::string& path) {
    httplib::Client client(target.base);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(30, 0);
    auto res = client.Get(target.prefix + path);
    HttpResult out;
    if (!res) {
        out.error = "transport error: " + httplib::to_string(res.error());
        return out;
    }
    if (res->status == 404) {
        out.not_found = true;
        out.error = "404";
        return out;
    }
    if (res->status < 200 || res->status >= 300) {
        out.error = "HTTP status " + std::to_string(res->status);
        return out;
    }
    out.ok = true;
    out.body = std::move(res->body);
    return out;
}

HttpResult http_get_with_retry(const FetchBackend& backend, const HttpTarget& target,
                               const std::string& path, int* attempts_out) {
    HttpResult last;
    for (int attempt = 0; attempt < backend.retry.max_attempts; ++attempt) {
        if (attempt > 0)
            backoff_sleep(backend.retry, attempt - 1);
        if (attempts_out)
            (*attempts_out)++;
        last = http_get(target, path);
        if (last.ok || last.not_found)
            return last;
    }
    return last;
}

// Streams {url path} to dest_part, resuming from its current size when the
// server honors Range, then renames into place.
void http_download_file(const FetchBackend& backend, const HttpTarget& target,
                        const std::string& path, const fs::path& dest, int* attempts_out) {
    const fs::path part = dest.string() + ".part";
    std::string error;

    for (int attempt = 0; attempt < backend.retry.max_attempts; ++attempt) {
        if (attempt > 0)
            backoff_sleep(backend.retry, attempt - 1);
        if (attempts_out)
            (*attempts_out)++;

        std::uintmax_t existing = 0;
        if (fs::exists(part))
            existing = fs::file_size(part);

        httplib::Client client(target.base);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(60, 0);

        httplib::Headers headers;
        if (existing > 0)
            headers.emplace("Range", "bytes=" + std::to_string(existing) + "-");

        std::ofstream out;
        int status = 0;
        bool io_error = false;
        auto res = client.Get(
            target.prefix + path, headers,
            [&](const httplib::Response& response) {
                status = response.status;
                if (status == 206) {
                    out.open(part, std::ios::binary | std::ios::app);
                } else if (status >= 200 && status < 300) {
                    out.open(part, std::ios::binary | std::ios::trunc);
                }
                return true;
            },
            [&](const char* data, std::size_t len) {
                if (!out.is_open())
                    return status >= 200 && status < 300;
                out.write(data, static_cast<std::streamsize>(len));
                io_error = !out.good();
                return !io_error;
            });
        out.close();

        if (!res) {
            error = "transport error: " + httplib::to_string(res.error());
            continue;  // keep the .part for resume
        }
        if (io_error) {
            error = "local write failed: " + part.string();
            continue;
        }
        if (status == 404)
            throw std::runtime_error("remote object missing: " + target.base + target.prefix + path);
        if (status < 200 || status >= 300) {
            error = "HTTP status " + std::to_string(status);
            continue;
        }
        fs::rename(part, dest);
        return;
    }
    throw std::runtime_error("download failed after " + std::to_string(backend.retry.max_attempts) +
                             " attempts (" + error + "): " + target.base + target.prefix + path);
}

void verify_digest(const std::vector<std::byte>& bytes, const std::string& sidecar_text,
                   const std::string& what) {
    // Sidecar format: "<hex digest>[  filename]".
    std::string expected = sidecar_text;
    const auto ws = expected.find_first_of(" \t\r\n");
    if (ws != std::string::npos)
        expected.resize(ws);
    std::transform(expected.begin(), expected.end(), expected.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const std::string actual = sha256_hex(bytes);
    if (expected != actual)
        throw std::runtime_error("checksum mismatch for " + what + ": sidecar " + expected +
                                 ", actual " + actual);
}

std::vector<std::byte> maybe_decompress(const FetchBackend& backend, std::vector<std::byte> bytes,
                                        const std::string& what) {
    if (!pointcloud::is_laz(bytes))
        return bytes;
    if (backend.decompress_cmd.empty())
        throw std::runtime_error(
            "LAZ payload for " + what +
            "; configure the decompress hook (backend.decompress_cmd, e.g. "
            "\"laszip -i {in} -o {out}\") or pre-decompress the corpus");

    const fs::path dir = backend.cache_dir.empty() ? fs::temp_directory_path()
                                                   : backend.cache_dir / "laz";
    fs::create_directories(dir);
    const std::string stem = sha256_hex(bytes).substr(0, 16);
    const fs::path in = dir / (stem + ".laz");
    const fs::path out = dir / (stem + ".las");
    atomic_write_file(in, bytes);

    std::string cmd = backend.decompress_cmd;
    const auto replace_all = [&cmd](const std::string& token, const std::string& value) {
        for (auto pos = cmd.find(token); pos != std::string::npos; pos = cmd.find(token))
            cmd.replace(pos, token.size(), value);
    };
    replace_all("{in}", in.string());
    replace_all("{out}", out.string());
    if (std::system(cmd.c_str()) != 0)
        throw std::runtime_error("decompress hook failed: " + cmd);
    return read_binary_file(out);
}

// Source bytes for a project, cached (HTTP) and digest-verified.
std::vector<std::byte> load_source(const FetchBackend& backend, const std::string& project_id,
                                   FetchTrace& trace) {
    if (backend.kind == FetchBackend::Kind::Local) {
        const fs::path path = fs::path(backend.root) / project_id / "pointcloud.las";
        auto bytes = read_binary_file(path);
        const fs::path sidecar = path.string() + ".sha256";
        if (fs::exists(sidecar))
            verify_digest(bytes, read_text_file(sidecar), path.string());
        return maybe_decompress(backend, std::move(bytes), path.string());
    }

    if (backend.cache_dir.empty())
        throw std::runtime_error("HTTP backend requires a cache directory");
    const HttpTarget target = split_url(backend.root);
    const fs::path cached = backend.cache_dir / "src" / (project_id + ".las");
    const fs::path digest_file = cached.string() + ".sha256";
    fs::create_directories(cached.parent_path());

    if (fs::exists(cached) && fs::exists(digest_file)) {
        auto bytes = read_binary_file(cached);
        const std::string stored = read_text_file(digest_file);
        if (sha256_hex(bytes) == stored) {
            trace.source_cache_hit = true;
            return maybe_decompress(backend, std::move(bytes), cached.string());
        }
        // Stale or corrupt cache entry: refuse to serve it, fetch again.
        fs::remove(cached);
        fs::remove(digest_file);
    }

    http_download_file(backend, target, "/" + project_id + "/pointcloud.las", cached,
                       &trace.http_attempts);
    auto bytes = read_binary_file(cached);

    const HttpResult sidecar =
        http_get(target, "/" + project_id + "/pointcloud.las.sha256");
    if (sidecar.ok)
        verify_digest(bytes, sidecar.body, project_id + "/pointcloud.las");

    atomic_write_file(digest_file, sha256_hex(bytes));
    return maybe_decompress(backend, std::move(bytes), cached.string());
}

int try_capture_year(const FetchBackend& backend, const std::string& project_id) {
    try {
        if (backend.kind == FetchBackend::Kind::Local) {
            return capture_year_from_metadata(
                read_text_file(fs::path(backend.root) / project_id / "metadata.json"));
        }
        const HttpTarget target = split_url(backend.root);
        const HttpResult res = http_get(target, "/" + project_id + "/metadata.json");
        if (res.ok)
            return capture_year_from_metadata(res.body);
    } catch (const std::exception&) {
    }
    return backend.default_capture_year;
}

}  // namespace

ProjectListing list_projects(const FetchBackend& backend) {
    ProjectListing listing;
    std::vector<std::string> ids;

    if (backend.kind == FetchBackend::Kind::Local) {
        const fs::path root(backend.root);
        if (!fs::is_directory(root))
            throw std::runtime_error("backend root not found: " + backend.root);
        for (const auto& dirent : fs::directory_iterator(root)) {
            if (dirent.is_directory())
                ids.push_back(dirent.path().filename().string());
        }
    } else {
        const HttpTarget target = split_url(backend.root);
        int attempts = 0;
        const HttpResult res = http_get_with_retry(backend, target, "/index.json", &attempts);
        if (!res.ok)
            throw std::runtime_error("cannot list projects from " + backend.root + ": " + res.error);
        for (const auto& id : nlohmann::json::parse(res.body))
            ids.push_back(id.get<std::string>());
    }

    std::sort(ids.begin(), ids.end());

    for (const std::string& id : ids) {
        try {
            ProjectInfo info;
            info.project_id = id;
            std::string boundary_text;
            std::string metadata_text;
            if (backend.kind == FetchBackend::Kind::Local) {
                boundary_text = read_text_file(fs::path(backend.root) / id / "boundary.geojson");
                const fs::path metadata = fs::path(backend.root) / id / "metadata.json";
                if (fs::exists(metadata))
                    metadata_text = read_text_file(metadata);
                info.source_url = (fs::path(backend.root) / id / "pointcloud.las").string();
            } else {
                const HttpTarget target = split_url(backend.root);
                HttpResult res = http_get_with_retry(backend, target, "/" + id + "/boundary.geojson",
                                                     nullptr);
                if (!res.ok)
                    throw std::runtime_error("boundary: " + res.error);
                boundary_text = std::move(res.body);
                res = http_get_with_retry(backend, target, "/" + id + "/metadata.json", nullptr);
                if (res.ok)
                    metadata_text = std::move(res.body);
                else if (!res.not_found)
                    throw std::runtime_error("metadata: " + res.error);
                info.source_url = backend.root + "/" + id + "/pointcloud.las";
            }
            info.boundary = geo::parse_geojson_boundary(boundary_text);
            if (!metadata_text.empty()) {
                info.capture_year = capture_year_from_metadata(metadata_text);
                if (const std::string url = source_url_from_metadata(metadata_text); !url.empty())
                    info.source_url = url;
            } else if (backend.default_capture_year > 0) {
                info.capture_year = backend.default_capture_year;
            } else {
                throw std::runtime_error("no capture_year metadata and no default configured");
            }
            listing.projects.push_back(std::move(info));
        } catch (const std::exception& e) {
            listing.skipped++;
            listing.warnings.push_back("project " + id + " skipped: " + e.what());
        }
    }
    return listing;
}

pointcloud::PointTile fetch_tile(const FetchBackend& backend, const sampler::ManifestEntry& entry) {
    FetchTrace trace;
    return fetch_tile(backend, entry, trace);
}

pointcloud::PointTile fetch_tile(const FetchBackend& backend, const sampler::ManifestEntry& entry,
                                 FetchTrace& trace) {
    const std::string cache_key =
        sha256_hex(entry.project_id + "|" + format_double(entry.bbox.minx, 3) + "|" +
                   format_double(entry.bbox.miny, 3) + "|" + format_double(entry.bbox.maxx, 3) +
                   "|" + format_double(entry.bbox.maxy, 3))
            .substr(0, 32);

    const int zone = entry.epsg % 100;
    const geo::Hemisphere hemisphere =
        entry.epsg / 100 == 327 ? geo::Hemisphere::South : geo::Hemisphere::North;

    const fs::path tile_cache = backend.cache_dir.empty()
                                    ? fs::path{}
                                    : backend.cache_dir / "tiles" / (cache_key + ".las");

    if (!tile_cache.empty() && fs::exists(tile_cache)) {
        const fs::path digest_file = tile_cache.string() + ".sha256";
        auto bytes = read_binary_file(tile_cache);
        if (fs::exists(digest_file) && sha256_hex(bytes) == read_text_file(digest_file)) {
            trace.tile_cache_hit = true;
            pointcloud::PointTile tile = pointcloud::parse_las(bytes);
            tile.bounds = entry.bbox;
            tile.utm_zone = zone;
            tile.hemisphere = hemisphere;
            tile.source_id = entry.project_id;
            tile.capture_year = try_capture_year(backend, entry.project_id);
            return tile;
        }
        fs::remove(tile_cache);  // unreadable or mismatched: rebuild
    }

    const auto source_bytes = load_source(backend, entry.project_id, trace);
    pointcloud::PointTile source = pointcloud::parse_las(source_bytes);
    source.source_id = entry.project_id;

    pointcloud::PointTile tile = pointcloud::crop(source, entry.bbox);
    tile.utm_zone = zone;
    tile.hemisphere = hemisphere;
    tile.source_id = entry.project_id;
    tile.capture_year = try_capture_year(backend, entry.project_id);

    if (!tile_cache.empty() && !tile.points.empty()) {
        const auto bytes = pointcloud::write_las(tile);
        atomic_write_file(tile_cache, bytes);
        atomic_write_file(fs::path(tile_cache.string() + ".sha256"), sha256_hex(bytes));
        // Serve the quantized form so cache hits and misses return identical tiles.
        pointcloud::PointTile cached = pointcloud::parse_las(bytes);
        cached.bounds = entry.bbox;
        cached.utm_zone = tile.utm_zone;
        cached.hemisphere = tile.hemisphere;
        cached.source_id = tile.source_id;
        cached.capture_year = tile.capture_year;
        return cached;
    }
    return tile;
}

}  // namespace alspipe::ingest
