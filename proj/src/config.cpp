#include "alspipe/config.hpp"

#include "alspipe/sha256.hpp"
#include "alspipe/util.hpp"

#include <charconv>
#include <set>
#include <sstream>
#include <stdexcept>

namespace alspipe::config {

std::string Value::as_string() const {
    if (const auto* s = std::get_if<std::string>(&data))
        return *s;
    throw std::runtime_error("config value is not a string");
}

long long Value::as_int() const {
    if (const auto* i = std::get_if<long long>(&data))
        return *i;
    throw std::runtime_error("config value is not an integer");
}

double Value::as_double() const {
    if (const auto* d = std::get_if<double>(&data))
        return *d;
    if (const auto* i = std::get_if<long long>(&data))
        return static_cast<double>(*i);
    throw std::runtime_error("config value is not a number");
}

bool Value::as_bool() const {
    if (const auto* b = std::get_if<bool>(&data))
        return *b;
    throw std::runtime_error("config value is not a boolean");
}

const std::vector<Value>& Value::as_array() const {
    if (const auto* a = std::get_if<std::vector<Value>>(&data))
        return *a;
    throw std::runtime_error("config value is not an array");
}

namespace {

std::string strip(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

Value parse_scalar(const std::string& raw, int line_no) {
    const std::string text = strip(raw);
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"')
        return Value{text.substr(1, text.size() - 2)};
    if (text == "true")
        return Value{true};
    if (text == "false")
        return Value{false};

    long long int_value = 0;
    {
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), int_value);
        if (ec == std::errc{} && ptr == text.data() + text.size())
            return Value{int_value};
    }
    double dbl_value = 0.0;
    {
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), dbl_value);
        if (ec == std::errc{} && ptr == text.data() + text.size())
            return Value{dbl_value};
    }
    throw std::runtime_error("config line " + std::to_string(line_no) + ": cannot parse value '" +
                             text + "' (strings need quotes)");
}

Value parse_value(const std::string& raw, int line_no) {
    const std::string text = strip(raw);
    if (text.empty())
        throw std::runtime_error("config line " + std::to_string(line_no) + ": missing value");
    if (text.front() == '[') {
        if (text.back() != ']')
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": unterminated array");
        std::vector<Value> items;
        const std::string body = text.substr(1, text.size() - 2);
        std::string current;
        bool in_string = false;
        for (char c : body) {
            if (c == '"')
                in_string = !in_string;
            if (c == ',' && !in_string) {
                if (!strip(current).empty())
                    items.push_back(parse_scalar(current, line_no));
                current.clear();
            } else {
                current.push_back(c);
            }
        }
        if (!strip(current).empty())
            items.push_back(parse_scalar(current, line_no));
        return Value{std::move(items)};
    }
    return parse_scalar(text, line_no);
}

std::string strip_comment(const std::string& line) {
    std::string out;
    bool in_string = false;
    for (char c : line) {
        if (c == '"')
            in_string = !in_string;
        if (c == '#' && !in_string)
            break;
        out.push_back(c);
    }
    return out;
}

std::vector<int> int_array(const Value& v) {
    std::vector<int> out;
    for (const Value& item : v.as_array())
        out.push_back(static_cast<int>(item.as_int()));
    return out;
}

std::vector<std::string> string_array(const Value& v) {
    std::vector<std::string> out;
    for (const Value& item : v.as_array())
        out.push_back(item.as_string());
    return out;
}

// Applies every recognized key in doc onto cfg; throws on keys it does not
// know so typos surface instead of silently using defaults.
void apply_document(PipelineConfig& cfg, const Document& doc) {
    std::set<std::string> consumed;
    auto with_key = [&](const std::string& section, const std::string& key, auto&& fn) {
        const auto sit = doc.find(section);
        if (sit == doc.end())
            return;
        const auto kit = sit->second.find(key);
        if (kit == sit->second.end())
            return;
        consumed.insert(section + "." + key);
        fn(kit->second);
    };

    with_key("", "seed", [&](const Value& v) { cfg.seed = static_cast<std::uint64_t>(v.as_int()); });
    with_key("", "workers", [&](const Value& v) { cfg.workers = static_cast<int>(v.as_int()); });
    with_key("", "cache_dir", [&](const Value& v) { cfg.backend.cache_dir = v.as_string(); });

    with_key("backend", "kind", [&](const Value& v) {
        const std::string kind = v.as_string();
        if (kind == "local")
            cfg.backend.kind = ingest::FetchBackend::Kind::Local;
        else if (kind == "http")
            cfg.backend.kind = ingest::FetchBackend::Kind::Http;
        else
            throw std::runtime_error("backend.kind must be local or http, got " + kind);
    });
    with_key("backend", "root", [&](const Value& v) { cfg.backend.root = v.as_string(); });
    with_key("backend", "max_attempts",
             [&](const Value& v) { cfg.backend.retry.max_attempts = static_cast<int>(v.as_int()); });
    with_key("backend", "backoff_ms", [&](const Value& v) {
        cfg.backend.retry.backoff_base = std::chrono::milliseconds(v.as_int());
    });
    with_key("backend", "decompress_cmd",
             [&](const Value& v) { cfg.backend.decompress_cmd = v.as_string(); });
    with_key("backend", "workers",
             [&](const Value& v) { cfg.backend.workers = static_cast<int>(v.as_int()); });
    with_key("backend", "default_capture_year", [&](const Value& v) {
        cfg.backend.default_capture_year = static_cast<int>(v.as_int());
    });

    with_key("plan", "dem", [&](const Value& v) { cfg.plan.dem = v.as_string(); });
    with_key("plan", "landcover_dir", [&](const Value& v) { cfg.plan.landcover_dir = v.as_string(); });
    with_key("plan", "nlcd_years", [&](const Value& v) { cfg.plan.nlcd_years = int_array(v); });
    with_key("plan", "patch_side", [&](const Value& v) { cfg.plan.patch_side = v.as_double(); });
    with_key("plan", "samples_per_project", [&](const Value& v) {
        cfg.plan.samples_per_project = static_cast<std::size_t>(v.as_int());
    });
    with_key("plan", "cap", [&](const Value& v) { cfg.plan.cap = static_cast<std::size_t>(v.as_int()); });
    with_key("plan", "allowed_landcover",
             [&](const Value& v) { cfg.plan.allowed_landcover = string_array(v); });
    with_key("plan", "slope_flat_max",
             [&](const Value& v) { cfg.plan.slope_flat_max = v.as_double(); });
    with_key("plan", "slope_steep_min",
             [&](const Value& v) { cfg.plan.slope_steep_min = v.as_double(); });
    with_key("plan", "utm_cell_size",
             [&](const Value& v) { cfg.plan.utm_cell_size = v.as_double(); });
    with_key("plan", "out", [&](const Value& v) { cfg.plan.out = v.as_string(); });

    with_key("fetch", "manifest", [&](const Value& v) { cfg.fetch.manifest = v.as_string(); });
    with_key("fetch", "out", [&](const Value& v) { cfg.fetch.out = v.as_string(); });

    with_key("stats", "manifest", [&](const Value& v) { cfg.stats.manifest = v.as_string(); });
    with_key("stats", "tiles", [&](const Value& v) { cfg.stats.tiles = v.as_string(); });
    with_key("stats", "subsample_fraction",
             [&](const Value& v) { cfg.stats.subsample_fraction = v.as_double(); });
    with_key("stats", "out", [&](const Value& v) { cfg.stats.out = v.as_string(); });

    with_key("prep", "manifest", [&](const Value& v) { cfg.prep.manifest = v.as_string(); });
    with_key("prep", "tiles", [&](const Value& v) { cfg.prep.tiles = v.as_string(); });
    with_key("prep", "crop_side", [&](const Value& v) { cfg.prep.spec.crop_side = v.as_double(); });
    with_key("prep", "voxel_size",
             [&](const Value& v) { cfg.prep.spec.voxel.voxel_size = v.as_double(); });
    with_key("prep", "max_voxels", [&](const Value& v) {
        cfg.prep.spec.voxel.max_voxels = static_cast<std::size_t>(v.as_int());
    });
    with_key("prep", "max_points_per_voxel", [&](const Value& v) {
        cfg.prep.spec.voxel.max_points_per_voxel = static_cast<std::size_t>(v.as_int());
    });
    with_key("prep", "bev_cell_xy",
             [&](const Value& v) { cfg.prep.spec.bev.cell_xy = v.as_double(); });
    with_key("prep", "bev_cell_z", [&](const Value& v) { cfg.prep.spec.bev.cell_z = v.as_double(); });
    with_key("prep", "bev_max_cells", [&](const Value& v) {
        cfg.prep.spec.bev.max_cells = static_cast<std::size_t>(v.as_int());
    });
    with_key("prep", "bev_max_points_per_cell", [&](const Value& v) {
        cfg.prep.spec.bev.max_points_per_cell = static_cast<std::size_t>(v.as_int());
    });
    with_key("prep", "mask_ratio",
             [&](const Value& v) { cfg.prep.spec.mask_ratio = v.as_double(); });
    with_key("prep", "scale_min",
             [&](const Value& v) { cfg.prep.spec.augment.scale_min = v.as_double(); });
    with_key("prep", "scale_max",
             [&](const Value& v) { cfg.prep.spec.augment.scale_max = v.as_double(); });
    with_key("prep", "translate_xy",
             [&](const Value& v) { cfg.prep.spec.augment.translate_xy = v.as_double(); });
    with_key("prep", "translate_z",
             [&](const Value& v) { cfg.prep.spec.augment.translate_z = v.as_double(); });
    with_key("prep", "augment",
             [&](const Value& v) { cfg.prep.spec.augment_enabled = v.as_bool(); });
    with_key("prep", "samples_per_tile", [&](const Value& v) {
        cfg.prep.samples_per_tile = static_cast<std::size_t>(v.as_int());
    });
    with_key("prep", "out", [&](const Value& v) { cfg.prep.out = v.as_string(); });

    with_key("tile", "tiles", [&](const Value& v) { cfg.tile.tiles = v.as_string(); });
    with_key("tile", "window", [&](const Value& v) {
        cfg.tile.train_spec.window = v.as_double();
        cfg.tile.eval_spec.window = v.as_double();
    });
    with_key("tile", "stride_train",
             [&](const Value& v) { cfg.tile.train_spec.stride = v.as_double(); });
    with_key("tile", "stride_eval",
             [&](const Value& v) { cfg.tile.eval_spec.stride = v.as_double(); });
    with_key("tile", "flush", [&](const Value& v) {
        cfg.tile.train_spec.flush = v.as_bool();
        cfg.tile.eval_spec.flush = v.as_bool();
    });
    with_key("tile", "train_fraction",
             [&](const Value& v) { cfg.tile.fractions[0] = v.as_double(); });
    with_key("tile", "val_fraction",
             [&](const Value& v) { cfg.tile.fractions[1] = v.as_double(); });
    with_key("tile", "test_fraction",
             [&](const Value& v) { cfg.tile.fractions[2] = v.as_double(); });
    with_key("tile", "labels", [&](const Value& v) { cfg.tile.labels = v.as_string(); });
    with_key("tile", "out", [&](const Value& v) { cfg.tile.out = v.as_string(); });

    with_key("eval", "pred", [&](const Value& v) { cfg.eval.pred = v.as_string(); });
    with_key("eval", "truth", [&](const Value& v) { cfg.eval.truth = v.as_string(); });
    with_key("eval", "classes", [&](const Value& v) {
        cfg.eval.num_classes = static_cast<std::size_t>(v.as_int());
    });
    with_key("eval", "out", [&](const Value& v) { cfg.eval.out = v.as_string(); });

    for (const auto& [section, entries] : doc) {
        for (const auto& [key, value] : entries) {
            (void)value;
            const std::string full = section + "." + key;
            if (!consumed.contains(full))
                throw std::runtime_error("unknown config key: " +
                                         (section.empty() ? key : full));
        }
    }
}

}  // namespace

Document parse_toml(const std::string& text) {
    Document doc;
    std::string section;  // "" = top level
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        const std::string body = strip(strip_comment(line));
        if (body.empty())
            continue;
        if (body.front() == '[') {
            if (body.back() != ']')
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": unterminated section header");
            section = strip(body.substr(1, body.size() - 2));
            doc[section];
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key = value");
        const std::string key = strip(body.substr(0, eq));
        if (key.empty())
            throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
        doc[section][key] = parse_value(body.substr(eq + 1), line_no);
    }
    return doc;
}

PipelineConfig config_from_document(const Document& doc) {
    PipelineConfig cfg;
    apply_document(cfg, doc);
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    return config_from_document(parse_toml(read_text_file(path)));
}

void apply_override(PipelineConfig& cfg, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
        throw std::runtime_error("override must be section.key=value: " + spec);
    const std::string path = spec.substr(0, eq);
    const auto dot = path.find('.');
    const std::string section = dot == std::string::npos ? "" : strip(path.substr(0, dot));
    const std::string key = strip(dot == std::string::npos ? path : path.substr(dot + 1));

    Document doc;
    doc[section][key] = parse_value(spec.substr(eq + 1), 0);
    apply_document(cfg, doc);
}

namespace {

void emit(std::ostringstream& out, const std::string& key, const std::string& value) {
    out << key << "=" << value << "\n";
}

}  // namespace

std::string canonical_config(const PipelineConfig& cfg) {
    std::ostringstream out;
    emit(out, "seed", std::to_string(cfg.seed));
    emit(out, "workers", std::to_string(cfg.workers));
    emit(out, "backend.kind",
         cfg.backend.kind == ingest::FetchBackend::Kind::Local ? "local" : "http");
    emit(out, "backend.root", cfg.backend.root);
    emit(out, "backend.cache_dir", cfg.backend.cache_dir.string());
    emit(out, "backend.max_attempts", std::to_string(cfg.backend.retry.max_attempts));
    emit(out, "backend.backoff_ms", std::to_string(cfg.backend.retry.backoff_base.count()));
    emit(out, "backend.decompress_cmd", cfg.backend.decompress_cmd);
    emit(out, "backend.workers", std::to_string(cfg.backend.workers));
    emit(out, "backend.default_capture_year", std::to_string(cfg.backend.default_capture_year));

    emit(out, "plan.dem", cfg.plan.dem);
    emit(out, "plan.landcover_dir", cfg.plan.landcover_dir);
    {
        std::string years;
        for (int y : cfg.plan.nlcd_years)
            years += std::to_string(y) + ",";
        emit(out, "plan.nlcd_years", years);
    }
    emit(out, "plan.patch_side", format_double(cfg.plan.patch_side, 6));
    emit(out, "plan.samples_per_project", std::to_string(cfg.plan.samples_per_project));
    emit(out, "plan.cap", std::to_string(cfg.plan.cap));
    {
        std::string allowed;
        for (const auto& lc : cfg.plan.allowed_landcover)
            allowed += lc + ",";
        emit(out, "plan.allowed_landcover", allowed);
    }
    emit(out, "plan.slope_flat_max", format_double(cfg.plan.slope_flat_max, 6));
    emit(out, "plan.slope_steep_min", format_double(cfg.plan.slope_steep_min, 6));
    emit(out, "plan.utm_cell_size", format_double(cfg.plan.utm_cell_size, 6));
    emit(out, "plan.out", cfg.plan.out);

    emit(out, "fetch.manifest", cfg.fetch.manifest);
    emit(out, "fetch.out", cfg.fetch.out);

    emit(out, "stats.manifest", cfg.stats.manifest);
    emit(out, "stats.tiles", cfg.stats.tiles);
    emit(out, "stats.subsample_fraction", format_double(cfg.stats.subsample_fraction, 6));
    emit(out, "stats.out", cfg.stats.out);

    emit(out, "prep.manifest", cfg.prep.manifest);
    emit(out, "prep.tiles", cfg.prep.tiles);
    emit(out, "prep.crop_side", format_double(cfg.prep.spec.crop_side, 6));
    emit(out, "prep.voxel_size", format_double(cfg.prep.spec.voxel.voxel_size, 6));
    emit(out, "prep.max_voxels", std::to_string(cfg.prep.spec.voxel.max_voxels));
    emit(out, "prep.max_points_per_voxel", std::to_string(cfg.prep.spec.voxel.max_points_per_voxel));
    emit(out, "prep.bev_cell_xy", format_double(cfg.prep.spec.bev.cell_xy, 6));
    emit(out, "prep.bev_cell_z", format_double(cfg.prep.spec.bev.cell_z, 6));
    emit(out, "prep.bev_max_cells", std::to_string(cfg.prep.spec.bev.max_cells));
    emit(out, "prep.bev_max_points_per_cell",
         std::to_string(cfg.prep.spec.bev.max_points_per_cell));
    emit(out, "prep.mask_ratio", format_double(cfg.prep.spec.mask_ratio, 6));
    emit(out, "prep.scale_min", format_double(cfg.prep.spec.augment.scale_min, 6));
    emit(out, "prep.scale_max", format_double(cfg.prep.spec.augment.scale_max, 6));
    emit(out, "prep.translate_xy", format_double(cfg.prep.spec.augment.translate_xy, 6));
    emit(out, "prep.translate_z", format_double(cfg.prep.spec.augment.translate_z, 6));
    emit(out, "prep.augment", cfg.prep.spec.augment_enabled ? "true" : "false");
    emit(out, "prep.samples_per_tile", std::to_string(cfg.prep.samples_per_tile));
    emit(out, "prep.out", cfg.prep.out);

    emit(out, "tile.tiles", cfg.tile.tiles);
    emit(out, "tile.window", format_double(cfg.tile.train_spec.window, 6));
    emit(out, "tile.stride_train", format_double(cfg.tile.train_spec.stride, 6));
    emit(out, "tile.stride_eval", format_double(cfg.tile.eval_spec.stride, 6));
    emit(out, "tile.flush", cfg.tile.train_spec.flush ? "true" : "false");
    emit(out, "tile.train_fraction", format_double(cfg.tile.fractions[0], 9));
    emit(out, "tile.val_fraction", format_double(cfg.tile.fractions[1], 9));
    emit(out, "tile.test_fraction", format_double(cfg.tile.fractions[2], 9));
    emit(out, "tile.labels", cfg.tile.labels);
    emit(out, "tile.out", cfg.tile.out);

    emit(out, "eval.pred", cfg.eval.pred);
    emit(out, "eval.truth", cfg.eval.truth);
    emit(out, "eval.classes", std::to_string(cfg.eval.num_classes));
    emit(out, "eval.out", cfg.eval.out);
    return out.str();
}

std::string config_hash(const PipelineConfig& cfg) {
    return sha256_hex(canonical_config(cfg));
}

}  // namespace alspipe::config
