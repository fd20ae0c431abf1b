#include "alspipe/stats.hpp"

#include "alspipe/rng.hpp"
#include "alspipe/util.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace alspipe::stats {

std::string_view to_string(ReturnCategory c) {
    switch (c) {
    case ReturnCategory::Single: return "Single";
    case ReturnCategory::First: return "First";
    case ReturnCategory::FirstOfMany: return "FirstOfMany";
    case ReturnCategory::Second: return "Second";
    case ReturnCategory::Third: return "Third";
    case ReturnCategory::Fourth: return "Fourth";
    case ReturnCategory::Fifth: return "Fifth";
    case ReturnCategory::Sixth: return "Sixth";
    case ReturnCategory::Seventh: return "Seventh";
    case ReturnCategory::Last: return "Last";
    case ReturnCategory::LastOfMany: return "LastOfMany";
    case ReturnCategory::Other: return "Other";
    case ReturnCategory::Anomalous: return "Anomalous";
    }
    return "?";
}

namespace {

inline void bump(ReturnTable& table, ReturnCategory c) {
    table[static_cast<std::size_t>(c)]++;
}

void tally_return(ReturnTable& table, int rn, int nr) {
    if (rn < 1 || rn > nr) {
        bump(table, ReturnCategory::Anomalous);
        return;
    }
    if (rn == 1) {
        bump(table, ReturnCategory::First);
        if (nr == 1)
            bump(table, ReturnCategory::Single);
        else
            bump(table, ReturnCategory::FirstOfMany);
    }
    switch (rn) {
    case 2: bump(table, ReturnCategory::Second); break;
    case 3: bump(table, ReturnCategory::Third); break;
    case 4: bump(table, ReturnCategory::Fourth); break;
    case 5: bump(table, ReturnCategory::Fifth); break;
    case 6: bump(table, ReturnCategory::Sixth); break;
    case 7: bump(table, ReturnCategory::Seventh); break;
    default:
        if (rn >= 8)
            bump(table, ReturnCategory::Other);
        break;
    }
    if (rn == nr) {
        bump(table, ReturnCategory::Last);
        if (nr > 1)
            bump(table, ReturnCategory::LastOfMany);
    }
}

}  // namespace

TileStats tile_stats(const pointcloud::PointTile& tile) {
    const double area = tile.bounds.area();
    if (!(area > 0.0))
        throw std::runtime_error("tile_stats: tile bounds have zero area");

    TileStats stats;
    stats.point_count = tile.points.size();
    stats.density = static_cast<double>(stats.point_count) / area;

    // Two-pass population std keeps the brute-force comparison exact.
    double ground_sum = 0.0;
    for (const auto& p : tile.points) {
        tally_return(stats.returns, p.return_number, p.number_of_returns);
        if (p.classification == 2) {
            stats.ground_count++;
            ground_sum += p.z;
        }
    }
    if (stats.ground_count > 0) {
        const double mean = ground_sum / static_cast<double>(stats.ground_count);
        double ssd = 0.0;
        for (const auto& p : tile.points) {
            if (p.classification == 2)
                ssd += (p.z - mean) * (p.z - mean);
        }
        stats.ground_std = std::sqrt(ssd / static_cast<double>(stats.ground_count));
        stats.ground_std_defined = true;
    }
    return stats;
}

double CellStats::return_percent(ReturnCategory c) const {
    if (total_points == 0)
        return 0.0;
    return 100.0 * static_cast<double>(returns[static_cast<std::size_t>(c)]) /
           static_cast<double>(total_points);
}

namespace {

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd out;
    out.n = values.size();
    if (values.empty())
        return out;
    double sum = 0.0;
    for (double v : values)
        sum += v;
    out.mean = sum / static_cast<double>(values.size());
    double ssd = 0.0;
    for (double v : values)
        ssd += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ssd / static_cast<double>(values.size()));
    return out;
}

CellStats cell_from_tiles(const std::vector<const TileStats*>& tiles) {
    CellStats cell;
    cell.tile_count = tiles.size();
    std::vector<double> densities, ground_stds;
    densities.reserve(tiles.size());
    for (const TileStats* t : tiles) {
        densities.push_back(t->density);
        if (t->ground_std_defined)
            ground_stds.push_back(t->ground_std);
        else
            cell.ground_excluded++;
        for (std::size_t i = 0; i < kReturnCategoryCount; ++i)
            cell.returns[i] += t->returns[i];
        cell.total_points += t->point_count;
    }
    cell.density = mean_std(densities);
    cell.ground_std = mean_std(ground_stds);
    return cell;
}

}  // namespace

GroupedStats aggregate(const std::vector<TileStats>& stats, const std::vector<JointKey>& labels) {
    if (stats.size() != labels.size())
        throw std::invalid_argument("aggregate: stats/labels length mismatch");

    std::map<JointKey, std::vector<const TileStats*>> by_cell;
    std::map<raster::LandCoverL1, std::vector<const TileStats*>> by_lc;
    std::map<raster::SlopeClass, std::vector<const TileStats*>> by_slope;
    std::vector<const TileStats*> everything;
    everything.reserve(stats.size());

    for (std::size_t i = 0; i < stats.size(); ++i) {
        by_cell[labels[i]].push_back(&stats[i]);
        by_lc[labels[i].landcover].push_back(&stats[i]);
        by_slope[labels[i].slope].push_back(&stats[i]);
        everything.push_back(&stats[i]);
    }

    GroupedStats grouped;
    for (const auto& [key, tiles] : by_cell)
        grouped.cells[key] = cell_from_tiles(tiles);
    for (const auto& [key, tiles] : by_lc)
        grouped.landcover_marginal[key] = cell_from_tiles(tiles);
    for (const auto& [key, tiles] : by_slope)
        grouped.slope_marginal[key] = cell_from_tiles(tiles);
    grouped.all = cell_from_tiles(everything);
    return grouped;
}

sampler::SampleManifest subsample_tiles(const sampler::SampleManifest& manifest, double fraction,
                                        std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("subsample fraction must be in (0, 1]");

    const std::size_t n = manifest.entries.size();
    const auto k = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(n)));

    sampler::SampleManifest out;
    out.seed = seed;
    if (k >= n) {
        out.entries = manifest.entries;
        return out;
    }

    Rng rng(seed);
    std::vector<std::size_t> chosen = sample_indices(n, k, rng);
    std::sort(chosen.begin(), chosen.end());
    out.entries.reserve(k);
    for (std::size_t i : chosen)
        out.entries.push_back(manifest.entries[i]);
    return out;
}

namespace {

void write_cell_json(std::ostringstream& out, const CellStats& cell, int indent) {
    const std::string pad(indent, ' ');
    out << "{\n";
    out << pad << "  \"tiles\": " << cell.tile_count << ",\n";
    out << pad << "  \"points\": " << cell.total_points << ",\n";
    out << pad << "  \"density\": {\"mean\": " << format_double(cell.density.mean, 6)
        << ", \"std\": " << format_double(cell.density.std, 6) << "},\n";
    out << pad << "  \"ground_std\": {\"mean\": " << format_double(cell.ground_std.mean, 6)
        << ", \"std\": " << format_double(cell.ground_std.std, 6)
        << ", \"tiles_excluded\": " << cell.ground_excluded << "},\n";
    out << pad << "  \"returns\": {";
    for (std::size_t i = 0; i < kReturnCategoryCount; ++i) {
        if (i)
            out << ", ";
        const auto cat = static_cast<ReturnCategory>(i);
        out << "\"" << to_string(cat) << "\": [" << cell.returns[i] << ", "
            << format_double(cell.return_percent(cat), 2) << "]";
    }
    out << "}\n" << pad << "}";
}

}  // namespace

std::string report_json(const GroupedStats& grouped) {
    std::ostringstream out;
    out << "{\n  \"cells\": {\n";
    bool first = true;
    for (const auto& [key, cell] : grouped.cells) {
        if (!first)
            out << ",\n";
        first = false;
        out << "    \"" << raster::to_string(key.landcover) << "/" << raster::to_string(key.slope)
            << "\": ";
        write_cell_json(out, cell, 4);
    }
    out << "\n  },\n  \"landcover\": {\n";
    first = true;
    for (const auto& [key, cell] : grouped.landcover_marginal) {
        if (!first)
            out << ",\n";
        first = false;
        out << "    \"" << raster::to_string(key) << "\": ";
        write_cell_json(out, cell, 4);
    }
    out << "\n  },\n  \"slope\": {\n";
    first = true;
    for (const auto& [key, cell] : grouped.slope_marginal) {
        if (!first)
            out << ",\n";
        first = false;
        out << "    \"" << raster::to_string(key) << "\": ";
        write_cell_json(out, cell, 4);
    }
    out << "\n  },\n  \"all\": ";
    write_cell_json(out, grouped.all, 2);
    out << "\n}\n";
    return out.str();
}

std::string tiles_csv(const std::vector<std::string>& ids, const std::vector<TileStats>& stats,
                      const std::vector<JointKey>& labels) {
    if (ids.size() != stats.size() || ids.size() != labels.size())
        throw std::invalid_argument("tiles_csv: length mismatch");
    std::ostringstream out;
    out << "tile_id,landcover,slope,points,density,ground_points,ground_std";
    for (std::size_t i = 0; i < kReturnCategoryCount; ++i)
        out << ',' << to_string(static_cast<ReturnCategory>(i));
    out << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const TileStats& t = stats[i];
        out << ids[i] << ',' << raster::to_string(labels[i].landcover) << ','
            << raster::to_string(labels[i].slope) << ',' << t.point_count << ','
            << format_double(t.density, 6) << ',' << t.ground_count << ','
            << (t.ground_std_defined ? format_double(t.ground_std, 6) : std::string(""));
        for (std::size_t c = 0; c < kReturnCategoryCount; ++c)
            out << ',' << t.returns[c];
        out << '\n';
    }
    return out.str();
}

}  // namespace alspipe::stats
