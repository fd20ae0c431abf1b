#include "alspipe/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace alspipe::geo {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;

// WGS84
constexpr double kSemiMajor = 6378137.0;
constexpr double kFlattening = 1.0 / 298.257223563;
constexpr double kScale = 0.9996;
constexpr double kFalseEasting = 500000.0;
constexpr double kFalseNorthingSouth = 10000000.0;

constexpr int kOrder = 6;

// Precomputed series for the exact transverse Mercator (Poder/Engsager form):
// geodetic<->Gaussian latitude and spherical<->ellipsoidal normalized N,E,
// all in the third flattening n.
struct TmSeries {
    double cgb[kOrder];  // Gaussian lat -> geodetic lat
    double cbg[kOrder];  // geodetic lat -> Gaussian lat
    double utg[kOrder];  // normalized N,E -> spherical
    double gtu[kOrder];  // spherical -> normalized N,E
    double qn;           // meridian quadrant scale, meters (includes a and k0)
};

const TmSeries& wgs84_series() {
    static const TmSeries series = [] {
        TmSeries s{};
        const double f = kFlattening;
        const double n = f / (2.0 - f);
        double np = n;

        s.cgb[0] = n * (2 + n * (-2 / 3.0 + n * (-2 + n * (116 / 45.0 + n * (26 / 45.0 + n * (-2854 / 675.0))))));
        s.cbg[0] = n * (-2 + n * (2 / 3.0 + n * (4 / 3.0 + n * (-82 / 45.0 + n * (32 / 45.0 + n * (4642 / 4725.0))))));
        np *= n;
        s.cgb[1] = np * (7 / 3.0 + n * (-8 / 5.0 + n * (-227 / 45.0 + n * (2704 / 315.0 + n * (2323 / 945.0)))));
        s.cbg[1] = np * (5 / 3.0 + n * (-16 / 15.0 + n * (-13 / 9.0 + n * (904 / 315.0 + n * (-1522 / 945.0)))));
        np *= n;
        s.cgb[2] = np * (56 / 15.0 + n * (-136 / 35.0 + n * (-1262 / 105.0 + n * (73814 / 2835.0))));
        s.cbg[2] = np * (-26 / 15.0 + n * (34 / 21.0 + n * (8 / 5.0 + n * (-12686 / 2835.0))));
        np *= n;
        s.cgb[3] = np * (4279 / 630.0 + n * (-332 / 35.0 + n * (-399572 / 14175.0)));
        s.cbg[3] = np * (1237 / 630.0 + n * (-12 / 5.0 + n * (-24832 / 14175.0)));
        np *= n;
        s.cgb[4] = np * (4174 / 315.0 + n * (-144838 / 6237.0));
        s.cbg[4] = np * (-734 / 315.0 + n * (109598 / 31185.0));
        np *= n;
        s.cgb[5] = np * (601676 / 22275.0);
        s.cbg[5] = np * (444337 / 155925.0);

        const double n2 = n * n;
        s.qn = kScale * kSemiMajor / (1 + n) * (1 + n2 * (1 / 4.0 + n2 * (1 / 64.0 + n2 / 256.0)));

        np = n;
        s.utg[0] = n * (-0.5 + n * (2 / 3.0 + n * (-37 / 96.0 + n * (1 / 360.0 + n * (81 / 512.0 + n * (-96199 / 604800.0))))));
        s.gtu[0] = n * (0.5 + n * (-2 / 3.0 + n * (5 / 16.0 + n * (41 / 180.0 + n * (-127 / 288.0 + n * (7891 / 37800.0))))));
        np *= n;
        s.utg[1] = np * (-1 / 48.0 + n * (-1 / 15.0 + n * (437 / 1440.0 + n * (-46 / 105.0 + n * (1118711 / 3870720.0)))));
        s.gtu[1] = np * (13 / 48.0 + n * (-3 / 5.0 + n * (557 / 1440.0 + n * (281 / 630.0 + n * (-1983433 / 1935360.0)))));
        np *= n;
        s.utg[2] = np * (-17 / 480.0 + n * (37 / 840.0 + n * (209 / 4480.0 + n * (-5569 / 90720.0))));
        s.gtu[2] = np * (61 / 240.0 + n * (-103 / 140.0 + n * (15061 / 26880.0 + n * (167603 / 181440.0))));
        np *= n;
        s.utg[3] = np * (-4397 / 161280.0 + n * (11 / 504.0 + n * (830251 / 7257600.0)));
        s.gtu[3] = np * (49561 / 161280.0 + n * (-179 / 168.0 + n * (6601661 / 7257600.0)));
        np *= n;
        s.utg[4] = np * (-4583 / 161280.0 + n * (108847 / 3991680.0));
        s.gtu[4] = np * (34729 / 80640.0 + n * (-3418889 / 1995840.0));
        np *= n;
        s.utg[5] = np * (-20648693 / 638668800.0);
        s.gtu[5] = np * (212378941 / 319334400.0);
        return s;
    }();
    return series;
}

// Clenshaw summation of sum(coeff[k] * sin(2*(k+1)*arg)), added to arg.
double gauss_lat(const double* coeff, double arg) {
    const double cos_2a = 2.0 * std::cos(2.0 * arg);
    double h = 0.0, h1 = coeff[kOrder - 1], h2 = 0.0;
    for (int i = kOrder - 2; i >= 0; --i) {
        h = -h2 + cos_2a * h1 + coeff[i];
        h2 = h1;
        h1 = h;
    }
    return arg + h1 * std::sin(2.0 * arg);
}

// Complex Clenshaw: sum(coeff[k] * sin(2*(k+1)*(r + i*im))); returns real part,
// stores imaginary part in *out_imag.
double clenshaw_complex(const double* coeff, double arg_r, double arg_i, double* out_imag) {
    const double sin_r = std::sin(arg_r);
    const double cos_r = std::cos(arg_r);
    const double sinh_i = std::sinh(arg_i);
    const double cosh_i = std::cosh(arg_i);
    const double r = 2.0 * cos_r * cosh_i;
    const double im = -2.0 * sin_r * sinh_i;

    double hr = coeff[kOrder - 1], hr1 = 0.0, hr2 = 0.0;
    double hi = 0.0, hi1 = 0.0, hi2 = 0.0;
    for (int k = kOrder - 2; k >= 0; --k) {
        hr2 = hr1;
        hi2 = hi1;
        hr1 = hr;
        hi1 = hi;
        hr = -hr2 + r * hr1 - im * hi1 + coeff[k];
        hi = -hi2 + im * hr1 + r * hi1;
    }
    const double sr = sin_r * cosh_i;
    const double si = cos_r * sinh_i;
    *out_imag = sr * hi + si * hr;
    return sr * hr - si * hi;
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        const double v = (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
        if (v > 0.0)
            return 1;
        if (v < 0.0)
            return -1;
        return 0;
    };
    auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
               std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
    };
    const int o1 = orient(a, b, c);
    const int o2 = orient(a, b, d);
    const int o3 = orient(c, d, a);
    const int o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4)
        return true;
    if (o1 == 0 && on_segment(a, b, c))
        return true;
    if (o2 == 0 && on_segment(a, b, d))
        return true;
    if (o3 == 0 && on_segment(c, d, a))
        return true;
    if (o4 == 0 && on_segment(c, d, b))
        return true;
    return false;
}

bool point_on_ring_edge(const Ring& ring, const Vec2& p) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const Vec2& a = ring[i];
        const Vec2& b = ring[i + 1];
        const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (cross != 0.0)
            continue;
        if (std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
            std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y))
            return true;
    }
    return false;
}

// Even-odd ray cast, ray toward +x from p.
bool ring_crossings_odd(const Ring& ring, const Vec2& p) {
    bool inside = false;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const Vec2& a = ring[i];
        const Vec2& b = ring[i + 1];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_at = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < x_at)
                inside = !inside;
        }
    }
    return inside;
}

}  // namespace

int utm_zone_of(const GeoPoint& p) {
    const int zone = static_cast<int>(std::floor((p.lon + 180.0) / 6.0)) + 1;
    return std::clamp(zone, 1, 60);
}

double central_meridian_deg(int zone) {
    return static_cast<double>(zone) * 6.0 - 183.0;
}

int epsg_code(int zone, Hemisphere h) {
    return (h == Hemisphere::North ? 32600 : 32700) + zone;
}

UtmCoord to_utm(const GeoPoint& p, int zone, Hemisphere hemisphere) {
    if (zone < 1 || zone > 60)
        throw std::invalid_argument("UTM zone out of range: " + std::to_string(zone));
    if (!(std::abs(p.lat) < 84.0))
        throw std::invalid_argument("latitude out of transverse-Mercator range: " + std::to_string(p.lat));

    const TmSeries& s = wgs84_series();
    const double lat = p.lat * kDegToRad;
    const double dlon = (p.lon - central_meridian_deg(zone)) * kDegToRad;

    // geodetic -> Gaussian latitude, then to the conformal sphere
    double cn = gauss_lat(s.cbg, lat);
    const double sin_cn = std::sin(cn);
    const double cos_cn = std::cos(cn);
    const double sin_ce = std::sin(dlon);
    const double cos_ce = std::cos(dlon);
    cn = std::atan2(sin_cn, cos_ce * cos_cn);
    double ce = std::atan2(sin_ce * cos_cn, std::hypot(sin_cn, cos_cn * cos_ce));
    ce = std::asinh(std::tan(ce));

    double dce = 0.0;
    cn += clenshaw_complex(s.gtu, 2.0 * cn, 2.0 * ce, &dce);
    ce += dce;

    UtmCoord out;
    out.zone = zone;
    out.hemisphere = hemisphere;
    out.easting = kFalseEasting + s.qn * ce;
    out.northing = (hemisphere == Hemisphere::South ? kFalseNorthingSouth : 0.0) + s.qn * cn;
    return out;
}

GeoPoint from_utm(const UtmCoord& c) {
    if (c.zone < 1 || c.zone > 60)
        throw std::invalid_argument("UTM zone out of range: " + std::to_string(c.zone));

    const TmSeries& s = wgs84_series();
    const double false_northing = c.hemisphere == Hemisphere::South ? kFalseNorthingSouth : 0.0;
    double cn = (c.northing - false_northing) / s.qn;
    double ce = (c.easting - kFalseEasting) / s.qn;

    double dce = 0.0;
    cn += clenshaw_complex(s.utg, 2.0 * cn, 2.0 * ce, &dce);
    ce += dce;
    ce = std::atan(std::sinh(ce));

    const double sin_cn = std::sin(cn);
    const double cos_cn = std::cos(cn);
    const double sin_ce = std::sin(ce);
    const double cos_ce = std::cos(ce);
    const double lon = std::atan2(sin_ce, cos_ce * cos_cn);
    const double gauss = std::atan2(sin_cn * cos_ce, std::hypot(sin_ce, cos_ce * cos_cn));

    GeoPoint out;
    out.lat = gauss_lat(s.cgb, gauss) * kRadToDeg;
    out.lon = central_meridian_deg(c.zone) + lon * kRadToDeg;
    return out;
}

bool contains(const Polygon& poly, const Vec2& p) {
    if (poly.exterior.size() < 4)
        return false;
    if (point_on_ring_edge(poly.exterior, p))
        return true;
    if (!ring_crossings_odd(poly.exterior, p))
        return false;
    for (const Ring& hole : poly.holes) {
        if (point_on_ring_edge(hole, p))
            return true;  // hole boundary belongs to the polygon
        if (ring_crossings_odd(hole, p))
            return false;
    }
    return true;
}

bool contains(const MultiPolygon& mp, const Vec2& p) {
    for (const Polygon& poly : mp)
        if (contains(poly, p))
            return true;
    return false;
}

Vec2 centroid(const Polygon& poly) {
    // Shoelace centroid of the exterior ring; falls back to the vertex mean
    // for degenerate (zero-area) rings.
    double area2 = 0.0, cx = 0.0, cy = 0.0;
    const Ring& ring = poly.exterior;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const double w = ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
        area2 += w;
        cx += (ring[i].x + ring[i + 1].x) * w;
        cy += (ring[i].y + ring[i + 1].y) * w;
    }
    if (area2 == 0.0) {
        double sx = 0.0, sy = 0.0;
        std::size_t n = ring.empty() ? 0 : ring.size() - 1;
        for (std::size_t i = 0; i < n; ++i) {
            sx += ring[i].x;
            sy += ring[i].y;
        }
        return n ? Vec2{sx / static_cast<double>(n), sy / static_cast<double>(n)} : Vec2{};
    }
    return {cx / (3.0 * area2), cy / (3.0 * area2)};
}

Vec2 centroid(const MultiPolygon& mp) {
    if (mp.empty())
        return {};
    if (mp.size() == 1)
        return centroid(mp.front());
    // Weight component centroids by |area|.
    double total = 0.0, cx = 0.0, cy = 0.0;
    for (const Polygon& poly : mp) {
        double area2 = 0.0;
        for (std::size_t i = 0; i + 1 < poly.exterior.size(); ++i)
            area2 += poly.exterior[i].x * poly.exterior[i + 1].y -
                     poly.exterior[i + 1].x * poly.exterior[i].y;
        const double w = std::abs(area2);
        const Vec2 c = centroid(poly);
        cx += c.x * w;
        cy += c.y * w;
        total += w;
    }
    if (total == 0.0)
        return centroid(mp.front());
    return {cx / total, cy / total};
}

Bbox bbox_of(const Polygon& poly) {
    Bbox b{1e300, 1e300, -1e300, -1e300};
    for (const Vec2& v : poly.exterior) {
        b.minx = std::min(b.minx, v.x);
        b.miny = std::min(b.miny, v.y);
        b.maxx = std::max(b.maxx, v.x);
        b.maxy = std::max(b.maxy, v.y);
    }
    return b;
}

Bbox bbox_of(const MultiPolygon& mp) {
    Bbox b{1e300, 1e300, -1e300, -1e300};
    for (const Polygon& poly : mp) {
        const Bbox pb = bbox_of(poly);
        b.minx = std::min(b.minx, pb.minx);
        b.miny = std::min(b.miny, pb.miny);
        b.maxx = std::max(b.maxx, pb.maxx);
        b.maxy = std::max(b.maxy, pb.maxy);
    }
    return b;
}

Polygon project_to_utm(const Polygon& lonlat, int zone, Hemisphere h) {
    auto project_ring = [&](const Ring& ring) {
        Ring out;
        out.reserve(ring.size());
        for (const Vec2& v : ring) {
            const UtmCoord c = to_utm(GeoPoint{v.x, v.y}, zone, h);
            out.push_back({c.easting, c.northing});
        }
        return out;
    };
    Polygon out;
    out.exterior = project_ring(lonlat.exterior);
    for (const Ring& hole : lonlat.holes)
        out.holes.push_back(project_ring(hole));
    return out;
}

MultiPolygon project_to_utm(const MultiPolygon& lonlat, int zone, Hemisphere h) {
    MultiPolygon out;
    out.reserve(lonlat.size());
    for (const Polygon& poly : lonlat)
        out.push_back(project_to_utm(poly, zone, h));
    return out;
}

namespace detail {

// Exposed for the loader in geojson.cpp.
void validate_ring(const Ring& ring, bool check_self_intersection) {
    if (ring.size() < 4)
        throw std::runtime_error("polygon ring has fewer than 4 vertices");
    if (ring.front().x != ring.back().x || ring.front().y != ring.back().y)
        throw std::runtime_error("polygon ring is not closed");
    if (!check_self_intersection)
        return;
    const std::size_t n = ring.size() - 1;  // segment count
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1)
                continue;  // first and last segments share the closing vertex
            if (segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]))
                throw std::runtime_error("polygon exterior ring self-intersects");
        }
    }
}

}  // namespace detail

}  // namespace alspipe::geo
