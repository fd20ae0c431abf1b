#include "alspipe/sampler.hpp"

#include "alspipe/rng.hpp"
#include "alspipe/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace alspipe::sampler {

double JointDistribution::probability(const JointKey& key) const {
    if (total == 0)
        return 0.0;
    const auto it = counts.find(key);
    if (it == counts.end())
        return 0.0;
    return static_cast<double>(it->second) / static_cast<double>(total);
}

int select_nlcd_year(int capture_year, const std::vector<int>& available) {
    if (available.empty())
        throw std::invalid_argument("no NLCD years available");
    int best = available.front();
    for (int year : available) {
        const int d = std::abs(year - capture_year);
        const int best_d = std::abs(best - capture_year);
        if (d < best_d || (d == best_d && year > best))
            best = year;
    }
    return best;
}

LabelResult label_patches(const raster::RasterGrid& landcover_l1,
                          const raster::RasterGrid& slope_class, const geo::MultiPolygon& boundary,
                          double patch_side, const std::string& project_id, int nlcd_year) {
    if (!(patch_side > 0.0))
        throw std::invalid_argument("patch side must be > 0");
    if (landcover_l1.crs() != slope_class.crs() || landcover_l1.crs().kind != raster::CrsTag::Kind::Utm)
        throw std::runtime_error("label_patches: grids must share a UTM CRS");
    if (landcover_l1.width() != slope_class.width() || landcover_l1.height() != slope_class.height() ||
        landcover_l1.origin_x() != slope_class.origin_x() ||
        landcover_l1.origin_y() != slope_class.origin_y() ||
        landcover_l1.cell_size() != slope_class.cell_size())
        throw std::runtime_error("label_patches: grids are not co-registered");

    const double cell = landcover_l1.cell_size();
    const double extent_x = landcover_l1.width() * cell;
    const double extent_y = landcover_l1.height() * cell;
    const auto cols = static_cast<std::size_t>(std::floor(extent_x / patch_side));
    const auto rows = static_cast<std::size_t>(std::floor(extent_y / patch_side));

    LabelResult result;
    result.grid_rows = rows;
    result.grid_cols = cols;

    constexpr int kNumLandcover = 8;
    constexpr int kNumSlope = 3;

    for (std::size_t pr = 0; pr < rows; ++pr) {
        for (std::size_t pc = 0; pc < cols; ++pc) {
            const double x0 = landcover_l1.origin_x() + static_cast<double>(pc) * patch_side;
            const double y1 = landcover_l1.origin_y() - static_cast<double>(pr) * patch_side;
            const double x1 = x0 + patch_side;
            const double y0 = y1 - patch_side;

            const geo::Vec2 center{(x0 + x1) / 2.0, (y0 + y1) / 2.0};
            if (!boundary.empty() && !geo::contains(boundary, center)) {
                result.dropped_outside++;
                continue;
            }

            // Cells whose centers fall inside the half-open patch square.
            const int c0 = std::max(landcover_l1.col_of(x0 + cell / 2.0), 0);
            const int c1 = std::min(landcover_l1.col_of(x1 - cell / 2.0), landcover_l1.width() - 1);
            const int r0 = std::max(landcover_l1.row_of(y1 - cell / 2.0), 0);
            const int r1 = std::min(landcover_l1.row_of(y0 + cell / 2.0), landcover_l1.height() - 1);

            std::array<std::size_t, kNumLandcover> lc_hist{};
            std::array<std::size_t, kNumSlope> slope_hist{};
            std::size_t total_cells = 0;
            std::size_t nodata_cells = 0;

            for (int r = r0; r <= r1; ++r) {
                for (int c = c0; c <= c1; ++c) {
                    total_cells++;
                    const float lc = landcover_l1.at(r, c);
                    const float sc = slope_class.at(r, c);
                    if (landcover_l1.is_nodata(lc) || slope_class.is_nodata(sc)) {
                        nodata_cells++;
                        continue;
                    }
                    const int lci = static_cast<int>(lc);
                    const int sci = static_cast<int>(sc);
                    if (lci < 0 || lci >= kNumLandcover)
                        throw std::runtime_error("label_patches: invalid Level-I code " +
                                                 std::to_string(lci));
                    if (sci < 0 || sci >= kNumSlope)
                        throw std::runtime_error("label_patches: invalid slope class " +
                                                 std::to_string(sci));
                    lc_hist[static_cast<std::size_t>(lci)]++;
                    slope_hist[static_cast<std::size_t>(sci)]++;
                }
            }

            if (total_cells == 0 || nodata_cells * 2 > total_cells) {
                result.dropped_nodata++;
                continue;
            }

            // Mode; ties resolve to the lower class index (Table-1 order).
            const auto modal = [](const auto& hist) {
                std::size_t best = 0;
                for (std::size_t i = 1; i < hist.size(); ++i)
                    if (hist[i] > hist[best])
                        best = i;
                return best;
            };

            PatchLabel label;
            label.bbox = {x0, y0, x1, y1};
            label.landcover = static_cast<LandCoverL1>(modal(lc_hist));
            label.slope = static_cast<SlopeClass>(modal(slope_hist));
            label.project_id = project_id;
            label.nlcd_year = nlcd_year;
            result.labels.push_back(std::move(label));
        }
    }
    return result;
}

JointDistribution joint_distribution(const std::vector<PatchLabel>& labels) {
    if (labels.empty())
        throw std::invalid_argument("joint_distribution: empty label list");
    JointDistribution dist;
    for (const PatchLabel& label : labels)
        dist.counts[label.joint()]++;
    dist.total = labels.size();
    return dist;
}

std::vector<PatchLabel> inverse_probability_sample(const std::vector<PatchLabel>& labels,
                                                   const JointDistribution& dist, std::size_t n,
                                                   std::uint64_t seed,
                                                   const std::set<LandCoverL1>& allowed_landcover) {
    std::vector<std::size_t> candidates;
    candidates.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (allowed_landcover.contains(labels[i].landcover))
            candidates.push_back(i);
    if (candidates.empty() || n == 0)
        return {};

    // p over the restricted pool: restrict the joint counts to the allowed
    // classes and renormalize.
    std::map<JointKey, std::size_t> restricted;
    std::size_t restricted_total = 0;
    for (const auto& [key, count] : dist.counts) {
        if (allowed_landcover.contains(key.landcover)) {
            restricted[key] = count;
            restricted_total += count;
        }
    }
    if (restricted_total == 0) {
        // dist inconsistent with labels; fall back to counting the candidates.
        for (std::size_t i : candidates)
            restricted[labels[i].joint()]++;
        restricted_total = candidates.size();
    }

    if (n >= candidates.size()) {
        std::vector<PatchLabel> all;
        all.reserve(candidates.size());
        for (std::size_t i : candidates)
            all.push_back(labels[i]);
        return all;
    }

    const auto weight_of = [&](std::size_t i) {
        const auto it = restricted.find(labels[i].joint());
        const std::size_t count = it == restricted.end() ? 0 : it->second;
        // Floor at one observation so an unseen class cannot yield an
        // infinite weight.
        const double p = std::max<double>(count, 1) / static_cast<double>(restricted_total);
        return 1.0 / p;
    };

    // Systematic proportional-to-size draw over a seeded shuffle: inclusion
    // probability is exactly n * w_i / W, which keeps the expected class
    // shares uniform. Candidates whose weight share exceeds 1/n are certainty
    // inclusions; the remainder is sampled systematically.
    Rng rng(seed);
    std::vector<std::size_t> order = candidates;
    shuffle(order, rng);

    std::vector<PatchLabel> out;
    out.reserve(n);
    std::size_t remaining = n;
    for (;;) {
        double total_weight = 0.0;
        for (std::size_t i : order)
            total_weight += weight_of(i);
        std::vector<std::size_t> keep;
        bool took_certainty = false;
        for (std::size_t i : order) {
            if (remaining > 0 &&
                weight_of(i) * static_cast<double>(remaining) >= total_weight) {
                out.push_back(labels[i]);
                remaining--;
                took_certainty = true;
            } else {
                keep.push_back(i);
            }
        }
        order = std::move(keep);
        if (!took_certainty || remaining == 0 || order.empty())
            break;
    }

    if (remaining > 0 && !order.empty()) {
        double total_weight = 0.0;
        for (std::size_t i : order)
            total_weight += weight_of(i);
        const double step = total_weight / static_cast<double>(remaining);
        double tick = uniform01(rng) * step;
        double cumulative = 0.0;
        for (std::size_t i : order) {
            cumulative += weight_of(i);
            // After certainty extraction every weight is under one step, so
            // at most one tick can land inside an item.
            if (tick < cumulative && remaining > 0) {
                out.push_back(labels[i]);
                remaining--;
                tick += step;
            }
        }
        // Numeric tail: ticks can fall a hair past the final cumulative sum.
        for (auto it = order.rbegin(); remaining > 0 && it != order.rend(); ++it) {
            bool already = false;
            for (const PatchLabel& chosen : out)
                already = already || (chosen.bbox.minx == labels[*it].bbox.minx &&
                                      chosen.bbox.miny == labels[*it].bbox.miny &&
                                      chosen.project_id == labels[*it].project_id);
            if (!already) {
                out.push_back(labels[*it]);
                remaining--;
            }
        }
    }
    return out;
}

std::map<JointKey, std::size_t> SampleManifest::summary() const {
    std::map<JointKey, std::size_t> counts;
    for (const ManifestEntry& e : entries)
        counts[JointKey{e.landcover, e.slope}]++;
    return counts;
}

SampleManifest build_manifest(const std::vector<ProjectSelection>& per_project, std::size_t cap,
                              std::uint64_t seed) {
    if (cap < 1)
        throw std::invalid_argument("manifest cap must be >= 1");

    std::vector<const ProjectSelection*> ordered;
    ordered.reserve(per_project.size());
    for (const ProjectSelection& sel : per_project)
        ordered.push_back(&sel);
    std::sort(ordered.begin(), ordered.end(),
              [](const auto* a, const auto* b) { return a->project_id < b->project_id; });

    SampleManifest manifest;
    manifest.seed = seed;
    for (const ProjectSelection* sel : ordered) {
        std::set<std::array<double, 4>> seen;
        std::size_t taken = 0;
        for (const PatchLabel& label : sel->selected) {
            if (taken == cap)
                break;
            const std::array<double, 4> key{label.bbox.minx, label.bbox.miny, label.bbox.maxx,
                                            label.bbox.maxy};
            if (!seen.insert(key).second)
                throw std::runtime_error("duplicate bbox in project " + sel->project_id);
            ManifestEntry entry;
            entry.project_id = sel->project_id;
            entry.epsg = sel->epsg;
            entry.bbox = label.bbox;
            entry.landcover = label.landcover;
            entry.slope = label.slope;
            entry.nlcd_year = label.nlcd_year;
            entry.source_url = sel->source_url;
            manifest.entries.push_back(std::move(entry));
            taken++;
        }
    }
    return manifest;
}

namespace {

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (static_cast<unsigned char>(c) < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                out += buf;
            } else {
                out.push_back(c);
            }
        }
    }
    return out;
}

}  // namespace

std::string manifest_to_jsonl(const SampleManifest& manifest) {
    std::ostringstream out;
    for (const ManifestEntry& e : manifest.entries) {
        out << "{\"project_id\":\"" << json_escape(e.project_id) << "\""
            << ",\"epsg\":" << e.epsg
            << ",\"minx\":" << format_double(e.bbox.minx, 3)
            << ",\"miny\":" << format_double(e.bbox.miny, 3)
            << ",\"maxx\":" << format_double(e.bbox.maxx, 3)
            << ",\"maxy\":" << format_double(e.bbox.maxy, 3)
            << ",\"landcover\":\"" << raster::to_string(e.landcover) << "\""
            << ",\"slope\":\"" << raster::to_string(e.slope) << "\""
            << ",\"nlcd_year\":" << e.nlcd_year
            << ",\"source_url\":\"" << json_escape(e.source_url) << "\"}\n";
    }
    return out.str();
}

SampleManifest parse_manifest_jsonl(std::string_view text) {
    SampleManifest manifest;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        line_no++;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos)
            continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        ManifestEntry entry;
        entry.project_id = doc.at("project_id").get<std::string>();
        entry.epsg = doc.at("epsg").get<int>();
        entry.bbox.minx = doc.at("minx").get<double>();
        entry.bbox.miny = doc.at("miny").get<double>();
        entry.bbox.maxx = doc.at("maxx").get<double>();
        entry.bbox.maxy = doc.at("maxy").get<double>();
        entry.landcover = raster::landcover_from_string(doc.at("landcover").get<std::string>());
        entry.slope = raster::slope_from_string(doc.at("slope").get<std::string>());
        entry.nlcd_year = doc.at("nlcd_year").get<int>();
        entry.source_url = doc.at("source_url").get<std::string>();
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

std::string manifest_summary_json(const SampleManifest& manifest) {
    const auto counts = manifest.summary();

    static constexpr std::array<SlopeClass, 3> kSlopes = {SlopeClass::Flat, SlopeClass::Sloped,
                                                          SlopeClass::Steep};

    // Land covers present, in enum (Table-1) order; columns of the matrix.
    std::set<LandCoverL1> present;
    for (const auto& [key, count] : counts)
        present.insert(key.landcover);

    std::ostringstream out;
    out << "{\n  \"total\": " << manifest.entries.size() << ",\n";
    out << "  \"seed\": " << manifest.seed << ",\n";
    out << "  \"counts\": {\n";
    bool first_row = true;
    for (const SlopeClass slope : kSlopes) {
        if (!first_row)
            out << ",\n";
        first_row = false;
        out << "    \"" << raster::to_string(slope) << "\": {";
        std::size_t row_total = 0;
        bool first_col = true;
        for (const LandCoverL1 lc : present) {
            std::size_t c = 0;
            if (const auto it = counts.find({lc, slope}); it != counts.end())
                c = it->second;
            row_total += c;
            if (!first_col)
                out << ", ";
            first_col = false;
            out << "\"" << raster::to_string(lc) << "\": " << c;
        }
        if (!first_col)
            out << ", ";
        out << "\"All\": " << row_total << "}";
    }
    if (!first_row)
        out << ",\n";
    out << "    \"All\": {";
    bool first_col = true;
    std::size_t grand_total = 0;
    for (const LandCoverL1 lc : present) {
        std::size_t col_total = 0;
        for (const SlopeClass slope : kSlopes) {
            if (const auto it = counts.find({lc, slope}); it != counts.end())
                col_total += it->second;
        }
        grand_total += col_total;
        if (!first_col)
            out << ", ";
        first_col = false;
        out << "\"" << raster::to_string(lc) << "\": " << col_total;
    }
    if (!first_col)
        out << ", ";
    out << "\"All\": " << grand_total << "}\n";
    out << "  }\n}\n";
    return out.str();
}

}  // namespace alspipe::sampler
