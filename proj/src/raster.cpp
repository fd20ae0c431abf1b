#include "alspipe/raster.hpp"

#include "alspipe/util.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <charconv>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace alspipe::raster {

RasterGrid::RasterGrid(int width, int height, double origin_x, double origin_y, double cell_size,
                       float nodata, CrsTag crs)
    : width_(width),
      height_(height),
      origin_x_(origin_x),
      origin_y_(origin_y),
      cell_size_(cell_size),
      nodata_(nodata),
      crs_(crs) {
    if (width < 1 || height < 1)
        throw std::invalid_argument("raster dimensions must be >= 1");
    if (!(cell_size > 0.0))
        throw std::invalid_argument("raster cell size must be > 0");
    band_.assign(static_cast<std::size_t>(width) * height, nodata);
}

bool RasterGrid::is_nodata(float v) const {
    if (std::isnan(v))
        return true;
    return v == nodata_;
}

int RasterGrid::col_of(double x) const {
    return static_cast<int>(std::floor((x - origin_x_) / cell_size_));
}

int RasterGrid::row_of(double y) const {
    return static_cast<int>(std::floor((origin_y_ - y) / cell_size_));
}

std::string_view to_string(LandCoverL1 c) {
    switch (c) {
    case LandCoverL1::Water: return "Water";
    case LandCoverL1::Developed: return "Developed";
    case LandCoverL1::Barren: return "Barren";
    case LandCoverL1::Forest: return "Forest";
    case LandCoverL1::Shrubland: return "Shrubland";
    case LandCoverL1::Herbaceous: return "Herbaceous";
    case LandCoverL1::PlantedCultivated: return "PlantedCultivated";
    case LandCoverL1::Wetlands: return "Wetlands";
    }
    return "?";
}

std::string_view to_string(SlopeClass s) {
    switch (s) {
    case SlopeClass::Flat: return "Flat";
    case SlopeClass::Sloped: return "Sloped";
    case SlopeClass::Steep: return "Steep";
    }
    return "?";
}

LandCoverL1 landcover_from_string(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(LandCoverL1::Wetlands); ++i) {
        const auto c = static_cast<LandCoverL1>(i);
        if (to_string(c) == name)
            return c;
    }
    throw std::runtime_error("unknown land cover class: " + std::string(name));
}

SlopeClass slope_from_string(std::string_view name) {
    for (int i = 0; i <= static_cast<int>(SlopeClass::Steep); ++i) {
        const auto s = static_cast<SlopeClass>(i);
        if (to_string(s) == name)
            return s;
    }
    throw std::runtime_error("unknown slope class: " + std::string(name));
}

namespace {

constexpr std::array<int, 20> kLevel2Codes = {11, 12, 21, 22, 23, 24, 31, 41, 42, 43,
                                              51, 52, 71, 72, 73, 74, 81, 82, 90, 95};

}  // namespace

std::span<const int> nlcd_level2_codes() {
    return kLevel2Codes;
}

LandCoverL1 merge_to_level1(int level2_code) {
    switch (level2_code) {
    case 11:
    case 12:
        return LandCoverL1::Water;
    case 21:
    case 22:
    case 23:
    case 24:
        return LandCoverL1::Developed;
    case 31:
        return LandCoverL1::Barren;
    case 41:
    case 42:
    case 43:
        return LandCoverL1::Forest;
    case 51:
    case 52:
        return LandCoverL1::Shrubland;
    case 71:
    case 72:
    case 73:
    case 74:
        return LandCoverL1::Herbaceous;
    case 81:
    case 82:
        return LandCoverL1::PlantedCultivated;
    case 90:
    case 95:
        return LandCoverL1::Wetlands;
    default:
        throw std::runtime_error("unknown NLCD Level II code: " + std::to_string(level2_code));
    }
}

namespace {

struct Token {
    std::string_view text;
    std::size_t next;  // position after token
};

Token next_token(std::string_view text, std::size_t pos) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
        ++pos;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end])))
        ++end;
    return {text.substr(pos, end - pos), end};
}

double parse_number(std::string_view token, const char* context) {
    double value = 0.0;
    const auto* begin = token.data();
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw std::runtime_error(std::string("non-numeric value in ") + context + ": '" +
                                 std::string(token) + "'");
    return value;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

RasterGrid parse_ascii_grid(std::string_view text, CrsTag crs) {
    long ncols = -1, nrows = -1;
    double xll = 0.0, yll = 0.0, cellsize = 0.0;
    float nodata = -9999.0f;
    bool have_xll = false, have_yll = false, have_cell = false;

    std::size_t pos = 0;
    // Header: key/value pairs until the first purely numeric token.
    for (;;) {
        const Token key = next_token(text, pos);
        if (key.text.empty())
            throw std::runtime_error("ASCII grid: missing data rows");
        const std::string k = lower(key.text);
        if (k != "ncols" && k != "nrows" && k != "xllcorner" && k != "yllcorner" &&
            k != "cellsize" && k != "nodata_value")
            break;  // first data token
        const Token value = next_token(text, key.next);
        if (value.text.empty())
            throw std::runtime_error("ASCII grid: header key without value: " + k);
        const double v = parse_number(value.text, "ASCII grid header");
        if (k == "ncols")
            ncols = static_cast<long>(v);
        else if (k == "nrows")
            nrows = static_cast<long>(v);
        else if (k == "xllcorner") {
            xll = v;
            have_xll = true;
        } else if (k == "yllcorner") {
            yll = v;
            have_yll = true;
        } else if (k == "cellsize") {
            cellsize = v;
            have_cell = true;
        } else {
            nodata = static_cast<float>(v);
        }
        pos = value.next;
    }

    if (ncols < 1 || nrows < 1 || !have_xll || !have_yll || !have_cell)
        throw std::runtime_error("ASCII grid: malformed header (need ncols, nrows, xllcorner, yllcorner, cellsize)");
    if (!(cellsize > 0.0))
        throw std::runtime_error("ASCII grid: cellsize must be > 0");

    RasterGrid grid(static_cast<int>(ncols), static_cast<int>(nrows), xll,
                    yll + static_cast<double>(nrows) * cellsize, cellsize, nodata, crs);

    const std::size_t expected = static_cast<std::size_t>(ncols) * static_cast<std::size_t>(nrows);
    auto band = grid.band();
    std::size_t count = 0;
    while (count < expected) {
        const Token tok = next_token(text, pos);
        if (tok.text.empty())
            break;
        band[count++] = static_cast<float>(parse_number(tok.text, "ASCII grid data"));
        pos = tok.next;
    }
    // Trailing content means the value count disagrees with the header.
    const Token extra = next_token(text, pos);
    if (count != expected || !extra.text.empty())
        throw std::runtime_error("ASCII grid: value count mismatch (header declares " +
                                 std::to_string(expected) + " cells)");
    return grid;
}

std::string write_ascii_grid(const RasterGrid& grid) {
    std::ostringstream out;
    out << "ncols " << grid.width() << "\n";
    out << "nrows " << grid.height() << "\n";
    out << "xllcorner " << format_double(grid.origin_x(), 6) << "\n";
    out << "yllcorner " << format_double(grid.origin_y() - grid.height() * grid.cell_size(), 6) << "\n";
    out << "cellsize " << format_double(grid.cell_size(), 6) << "\n";
    out << "NODATA_value " << format_double(grid.nodata(), 3) << "\n";
    for (int r = 0; r < grid.height(); ++r) {
        for (int c = 0; c < grid.width(); ++c) {
            if (c)
                out << ' ';
            const float v = grid.at(r, c);
            if (v == std::floor(v) && std::abs(v) < 1e7f)
                out << static_cast<long long>(v);
            else
                out << format_double(v, 6);
        }
        out << "\n";
    }
    return out.str();
}

RasterGrid parse_raster_file(const std::filesystem::path& path, CrsTag crs) {
    const auto bytes = read_binary_file(path);
    if (bytes.size() >= 4) {
        const auto b0 = static_cast<unsigned char>(bytes[0]);
        const auto b1 = static_cast<unsigned char>(bytes[1]);
        if ((b0 == 'I' && b1 == 'I') || (b0 == 'M' && b1 == 'M'))
            return parse_geotiff(bytes, crs);
    }
    return parse_ascii_grid(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                            crs);
}

RasterGrid slope_degrees(const RasterGrid& dem) {
    if (dem.crs().kind != CrsTag::Kind::Utm)
        throw std::runtime_error("slope requires a metric (UTM) raster");
    if (dem.width() < 3 || dem.height() < 3)
        throw std::runtime_error("slope requires a raster of at least 3x3 cells");

    RasterGrid out(dem.width(), dem.height(), dem.origin_x(), dem.origin_y(), dem.cell_size(),
                   dem.nodata(), dem.crs());

    const int w = dem.width();
    const int h = dem.height();
    const double denom = 8.0 * dem.cell_size();

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            // Edge replication via clamped window indices.
            const int rn = std::max(r - 1, 0);
            const int rs = std::min(r + 1, h - 1);
            const int cw = std::max(c - 1, 0);
            const int ce = std::min(c + 1, w - 1);

            const float z1 = dem.at(rn, cw), z2 = dem.at(rn, c), z3 = dem.at(rn, ce);
            const float z4 = dem.at(r, cw), z5 = dem.at(r, c), z6 = dem.at(r, ce);
            const float z7 = dem.at(rs, cw), z8 = dem.at(rs, c), z9 = dem.at(rs, ce);

            bool any_nodata = false;
            for (float z : {z1, z2, z3, z4, z5, z6, z7, z8, z9})
                any_nodata |= dem.is_nodata(z);
            if (any_nodata) {
                out.set(r, c, out.nodata());
                continue;
            }

            const double gx = ((double(z3) + 2.0 * z6 + z9) - (double(z1) + 2.0 * z4 + z7)) / denom;
            const double gy = ((double(z7) + 2.0 * z8 + z9) - (double(z1) + 2.0 * z2 + z3)) / denom;
            const double slope = std::atan(std::sqrt(gx * gx + gy * gy)) * 180.0 / std::numbers::pi;
            out.set(r, c, static_cast<float>(slope));
        }
    }
    return out;
}

SlopeClass classify_slope_value(double degrees, double flat_max, double steep_min) {
    if (degrees < 0.0)
        throw std::runtime_error("negative slope: " + std::to_string(degrees));
    if (degrees < flat_max)
        return SlopeClass::Flat;
    if (degrees < steep_min)
        return SlopeClass::Sloped;
    return SlopeClass::Steep;
}

RasterGrid classify_slope(const RasterGrid& slope, double flat_max, double steep_min) {
    RasterGrid out(slope.width(), slope.height(), slope.origin_x(), slope.origin_y(),
                   slope.cell_size(), slope.nodata(), slope.crs());
    for (int r = 0; r < slope.height(); ++r) {
        for (int c = 0; c < slope.width(); ++c) {
            const float v = slope.at(r, c);
            if (slope.is_nodata(v)) {
                out.set(r, c, out.nodata());
                continue;
            }
            out.set(r, c,
                    static_cast<float>(static_cast<int>(classify_slope_value(v, flat_max, steep_min))));
        }
    }
    return out;
}

double percent_of_degrees(double degrees) {
    return 100.0 * std::tan(degrees * std::numbers::pi / 180.0);
}

RasterGrid to_level1_grid(const RasterGrid& nlcd) {
    RasterGrid out(nlcd.width(), nlcd.height(), nlcd.origin_x(), nlcd.origin_y(), nlcd.cell_size(),
                   nlcd.nodata(), nlcd.crs());
    for (int r = 0; r < nlcd.height(); ++r) {
        for (int c = 0; c < nlcd.width(); ++c) {
            const float v = nlcd.at(r, c);
            if (nlcd.is_nodata(v)) {
                out.set(r, c, out.nodata());
                continue;
            }
            const auto l1 = merge_to_level1(static_cast<int>(v));
            out.set(r, c, static_cast<float>(static_cast<int>(l1)));
        }
    }
    return out;
}

RasterGrid crop_to_polygon(const RasterGrid& grid, const geo::MultiPolygon& poly) {
    const geo::Bbox bb = geo::bbox_of(poly);

    // Cell range covered by the polygon bbox, clipped to the grid.
    int col0 = std::max(grid.col_of(bb.minx), 0);
    int row0 = std::max(grid.row_of(bb.maxy), 0);
    int col1 = std::min(grid.col_of(std::nexttoward(bb.maxx, bb.minx)), grid.width() - 1);
    int row1 = std::min(grid.row_of(std::nexttoward(bb.miny, bb.maxy)), grid.height() - 1);
    if (col0 > col1 || row0 > row1)
        throw std::runtime_error("polygon does not intersect the raster extent");

    const int w = col1 - col0 + 1;
    const int h = row1 - row0 + 1;
    RasterGrid out(w, h, grid.origin_x() + col0 * grid.cell_size(),
                   grid.origin_y() - row0 * grid.cell_size(), grid.cell_size(), grid.nodata(),
                   grid.crs());

    bool any_inside = false;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const geo::Vec2 center{out.cell_center_x(c), out.cell_center_y(r)};
            if (geo::contains(poly, center)) {
                out.set(r, c, grid.at(row0 + r, col0 + c));
                any_inside = true;
            } else {
                out.set(r, c, out.nodata());
            }
        }
    }
    if (!any_inside)
        throw std::runtime_error("polygon does not cover any raster cell center");
    return out;
}

RasterGrid crop_to_polygon(const RasterGrid& grid, const geo::Polygon& poly) {
    return crop_to_polygon(grid, geo::MultiPolygon{poly});
}

RasterGrid resample_nearest(const RasterGrid& src, const RasterGrid& target) {
    RasterGrid out(target.width(), target.height(), target.origin_x(), target.origin_y(),
                   target.cell_size(), src.nodata(), target.crs());
    for (int r = 0; r < out.height(); ++r) {
        for (int c = 0; c < out.width(); ++c) {
            const int sc = src.col_of(out.cell_center_x(c));
            const int sr = src.row_of(out.cell_center_y(r));
            if (sc < 0 || sc >= src.width() || sr < 0 || sr >= src.height()) {
                out.set(r, c, out.nodata());
                continue;
            }
            out.set(r, c, src.at(sr, sc));
        }
    }
    return out;
}

RasterGrid project_to_utm(const RasterGrid& geographic, int zone, geo::Hemisphere hemisphere,
                          double cell_size_m) {
    if (geographic.crs().kind != CrsTag::Kind::Geographic)
        throw std::runtime_error("project_to_utm expects a geographic raster");
    if (!(cell_size_m > 0.0))
        throw std::invalid_argument("target cell size must be > 0");

    // Project the four corners to bound the UTM extent.
    const double lon0 = geographic.origin_x();
    const double lat0 = geographic.origin_y();
    const double lon1 = lon0 + geographic.width() * geographic.cell_size();
    const double lat1 = lat0 - geographic.height() * geographic.cell_size();
    double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
    for (const auto& [lon, lat] : {std::pair{lon0, lat0}, {lon1, lat0}, {lon0, lat1}, {lon1, lat1}}) {
        const geo::UtmCoord c = geo::to_utm({lon, lat}, zone, hemisphere);
        minx = std::min(minx, c.easting);
        maxx = std::max(maxx, c.easting);
        miny = std::min(miny, c.northing);
        maxy = std::max(maxy, c.northing);
    }

    const int w = std::max(1, static_cast<int>(std::ceil((maxx - minx) / cell_size_m)));
    const int h = std::max(1, static_cast<int>(std::ceil((maxy - miny) / cell_size_m)));
    RasterGrid out(w, h, minx, maxy, cell_size_m, geographic.nodata(),
                   CrsTag{CrsTag::Kind::Utm, zone, hemisphere});

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const geo::GeoPoint ll = geo::from_utm(
                {out.cell_center_x(c), out.cell_center_y(r), zone, hemisphere});
            const int sc = geographic.col_of(ll.lon);
            const int sr = geographic.row_of(ll.lat);
            if (sc < 0 || sc >= geographic.width() || sr < 0 || sr >= geographic.height()) {
                out.set(r, c, out.nodata());
                continue;
            }
            out.set(r, c, geographic.at(sr, sc));
        }
    }
    return out;
}

}  // namespace alspipe::raster
