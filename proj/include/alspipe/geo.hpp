#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace alspipe::geo {

enum class Hemisphere { North, South };

struct GeoPoint {
    double lon = 0.0;  // degrees east, [-180, 180)
    double lat = 0.0;  // degrees north, strictly inside (-90, 90)
};

struct UtmCoord {
    double easting = 0.0;
    double northing = 0.0;
    int zone = 0;  // 1..60
    Hemisphere hemisphere = Hemisphere::North;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Bbox {
    double minx = 0.0;
    double miny = 0.0;
    double maxx = 0.0;
    double maxy = 0.0;
};

// Closed ring: front() == back(), at least 4 vertices.
using Ring = std::vector<Vec2>;

// CRS-agnostic planar polygon; rings hold lon/lat straight off GeoJSON or
// easting/northing after reprojection.
struct Polygon {
    Ring exterior;
    std::vector<Ring> holes;
};

using MultiPolygon = std::vector<Polygon>;

int utm_zone_of(const GeoPoint& p);
double central_meridian_deg(int zone);
int epsg_code(int zone, Hemisphere h);

// WGS84 transverse Mercator, 6th-order series; scale 0.9996,
// false easting 500 km, false northing 10 000 km south.
UtmCoord to_utm(const GeoPoint& p, int zone, Hemisphere hemisphere);
GeoPoint from_utm(const UtmCoord& c);

// Even-odd rule; points on an edge count as inside. Interior rings subtract.
bool contains(const Polygon& poly, const Vec2& p);
bool contains(const MultiPolygon& mp, const Vec2& p);

Vec2 centroid(const Polygon& poly);
Vec2 centroid(const MultiPolygon& mp);
Bbox bbox_of(const Polygon& poly);
Bbox bbox_of(const MultiPolygon& mp);

Polygon project_to_utm(const Polygon& lonlat, int zone, Hemisphere h);
MultiPolygon project_to_utm(const MultiPolygon& lonlat, int zone, Hemisphere h);

// Minimal GeoJSON subset: FeatureCollection (or bare geometry) of
// Polygon/MultiPolygon in WGS84. Unknown members ignored. Rings are
// validated: closed, >= 4 vertices, exterior non-self-intersecting.
MultiPolygon parse_geojson_boundary(std::string_view text);

}  // namespace alspipe::geo
