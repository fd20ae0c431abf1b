#include "alspipe/geo.hpp"

#include <json.hpp>

#include <stdexcept>

namespace alspipe::geo {

namespace detail {
void validate_ring(const Ring& ring, bool check_self_intersection);
}

namespace {

using nlohmann::json;

Ring parse_ring(const json& coords) {
    Ring ring;
    ring.reserve(coords.size());
    for (const auto& pos : coords) {
        if (!pos.is_array() || pos.size() < 2)
            throw std::runtime_error("GeoJSON position must be [lon, lat]");
        ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
    }
    return ring;
}

Polygon parse_polygon_coords(const json& coords) {
    if (!coords.is_array() || coords.empty())
        throw std::runtime_error("GeoJSON Polygon has no rings");
    Polygon poly;
    poly.exterior = parse_ring(coords[0]);
    detail::validate_ring(poly.exterior, /*check_self_intersection=*/true);
    for (std::size_t i = 1; i < coords.size(); ++i) {
        Ring hole = parse_ring(coords[i]);
        detail::validate_ring(hole, /*check_self_intersection=*/false);
        poly.holes.push_back(std::move(hole));
    }
    return poly;
}

void parse_geometry(const json& geom, MultiPolygon& out) {
    if (!geom.is_object() || !geom.contains("type"))
        throw std::runtime_error("GeoJSON geometry missing type");
    const std::string type = geom.at("type").get<std::string>();
    if (type == "Polygon") {
        out.push_back(parse_polygon_coords(geom.at("coordinates")));
    } else if (type == "MultiPolygon") {
        for (const auto& poly_coords : geom.at("coordinates"))
            out.push_back(parse_polygon_coords(poly_coords));
    } else {
        throw std::runtime_error("unsupported GeoJSON geometry type: " + type);
    }
}

}  // namespace

MultiPolygon parse_geojson_boundary(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("invalid GeoJSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("type"))
        throw std::runtime_error("GeoJSON document missing type");

    MultiPolygon out;
    const std::string type = doc.at("type").get<std::string>();
    if (type == "FeatureCollection") {
        if (!doc.contains("features") || !doc.at("features").is_array())
            throw std::runtime_error("FeatureCollection missing features array");
        for (const auto& feature : doc.at("features")) {
            if (!feature.is_object() || !feature.contains("geometry") || feature.at("geometry").is_null())
                continue;
            parse_geometry(feature.at("geometry"), out);
        }
    } else if (type == "Feature") {
        if (doc.contains("geometry") && !doc.at("geometry").is_null())
            parse_geometry(doc.at("geometry"), out);
    } else {
        parse_geometry(doc, out);
    }
    if (out.empty())
        throw std::runtime_error("GeoJSON boundary contains no polygons");
    return out;
}

}  // namespace alspipe::geo
