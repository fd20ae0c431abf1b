#pragma once

#include "alspipe/geo.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace alspipe::raster {

struct CrsTag {
    enum class Kind { Geographic, Utm };
    Kind kind = Kind::Utm;
    int zone = 0;
    geo::Hemisphere hemisphere = geo::Hemisphere::North;
    bool operator==(const CrsTag&) const = default;
};

// Georeferenced single-band grid, row 0 northernmost, origin at the
// upper-left corner. Band values are float: elevations directly, class maps
// as exact small integers.
class RasterGrid {
public:
    RasterGrid() = default;
    RasterGrid(int width, int height, double origin_x, double origin_y, double cell_size,
               float nodata, CrsTag crs);

    int width() const { return width_; }
    int height() const { return height_; }
    double origin_x() const { return origin_x_; }
    double origin_y() const { return origin_y_; }
    double cell_size() const { return cell_size_; }
    float nodata() const { return nodata_; }
    const CrsTag& crs() const { return crs_; }

    float at(int row, int col) const { return band_[static_cast<std::size_t>(row) * width_ + col]; }
    void set(int row, int col, float v) { band_[static_cast<std::size_t>(row) * width_ + col] = v; }
    bool is_nodata(float v) const;

    double cell_center_x(int col) const { return origin_x_ + (col + 0.5) * cell_size_; }
    double cell_center_y(int row) const { return origin_y_ - (row + 0.5) * cell_size_; }
    // Cell whose extent covers (x, y); may be out of range.
    int col_of(double x) const;
    int row_of(double y) const;

    std::span<const float> band() const { return band_; }
    std::span<float> band() { return band_; }

private:
    int width_ = 0;
    int height_ = 0;
    double origin_x_ = 0.0;
    double origin_y_ = 0.0;
    double cell_size_ = 0.0;
    float nodata_ = -9999.0f;
    CrsTag crs_;
    std::vector<float> band_;
};

enum class LandCoverL1 {
    Water,
    Developed,
    Barren,
    Forest,
    Shrubland,
    Herbaceous,
    PlantedCultivated,
    Wetlands,
};

enum class SlopeClass { Flat, Sloped, Steep };

inline constexpr double kFlatMaxDegrees = 5.0;
inline constexpr double kSteepMinDegrees = 17.0;

std::string_view to_string(LandCoverL1 c);
std::string_view to_string(SlopeClass s);
LandCoverL1 landcover_from_string(std::string_view name);
SlopeClass slope_from_string(std::string_view name);

// NLCD Level II code -> Level I class. Throws on codes outside the published set.
LandCoverL1 merge_to_level1(int level2_code);
std::span<const int> nlcd_level2_codes();

// ESRI ASCII grid. Parsing accepts the standard header key set (ncols, nrows,
// xllcorner, yllcorner, cellsize, NODATA_value); the lower-left origin is
// converted to the upper-left convention. CRS defaults to Utm zone 0 and must
// be tagged by the caller when known.
RasterGrid parse_ascii_grid(std::string_view text, CrsTag crs = {});
std::string write_ascii_grid(const RasterGrid& grid);

// Minimal GeoTIFF: single band, single strip, uncompressed, uint8/float32,
// ModelTiepoint + ModelPixelScale georeferencing.
RasterGrid parse_geotiff(std::span<const std::byte> bytes, CrsTag crs = {});

// Dispatches on content magic (TIFF II*/MM*) vs ASCII grid.
RasterGrid parse_raster_file(const std::filesystem::path& path, CrsTag crs = {});

// Horn 3x3 gradient, edge replication at borders, nodata propagates to any
// cell whose window touches nodata. Requires a metric CRS.
RasterGrid slope_degrees(const RasterGrid& dem);

// [0,5) Flat, [5,17) Sloped, [17,inf) Steep; band stores the class as 0/1/2.
// Boundary values go to the higher class. Thresholds are overridable but
// default to the published 5/17 split.
RasterGrid classify_slope(const RasterGrid& slope, double flat_max = kFlatMaxDegrees,
                          double steep_min = kSteepMinDegrees);
SlopeClass classify_slope_value(double degrees, double flat_max = kFlatMaxDegrees,
                                double steep_min = kSteepMinDegrees);

double percent_of_degrees(double degrees);

// Per-cell Level II -> Level I merge; unknown non-nodata codes throw.
RasterGrid to_level1_grid(const RasterGrid& nlcd);

// Crops to the polygon's bbox intersected with the grid; cells whose centers
// fall outside the polygon become nodata. Throws when the intersection is empty.
RasterGrid crop_to_polygon(const RasterGrid& grid, const geo::MultiPolygon& poly);
RasterGrid crop_to_polygon(const RasterGrid& grid, const geo::Polygon& poly);

// Nearest-neighbor resample of src onto the geometry of target.
RasterGrid resample_nearest(const RasterGrid& src, const RasterGrid& target);

// Nearest-neighbor projection of a geographic grid into UTM meters.
RasterGrid project_to_utm(const RasterGrid& geographic, int zone, geo::Hemisphere hemisphere,
                          double cell_size_m);

}  // namespace alspipe::raster
