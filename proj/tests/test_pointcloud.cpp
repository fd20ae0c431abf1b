#include "alspipe/pointcloud.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace alspipe;
using pointcloud::Bounds;
using pointcloud::PointTile;

TEST_SUITE("pointcloud") {

TEST_CASE("parse_las: hand-built LAS 1.2 fixture with scale 0.01") {
    const auto bytes = fixtures::make_las12_format0(
        {{100, 200, 300, 7, 1, 2, 2}, {-50, 0, 25, 0, 2, 2, 1}, {12345, -6789, 0, 9, 1, 1, 5}},
        0.01, 1000.0, 2000.0, 0.0);
    const PointTile tile = pointcloud::parse_las(bytes);
    REQUIRE(tile.points.size() == 3);
    CHECK(tile.points[0].x == doctest::Approx(1001.0));
    CHECK(tile.points[0].y == doctest::Approx(2002.0));
    CHECK(tile.points[0].z == doctest::Approx(3.0));
    CHECK(tile.points[0].classification == 2);
    CHECK(tile.points[0].return_number == 1);
    CHECK(tile.points[0].number_of_returns == 2);
    CHECK(tile.points[1].return_number == 2);
    CHECK(tile.points[2].classification == 5);
    CHECK(tile.points[2].intensity == 9);
}

TEST_CASE("parse_las: malformed payloads raise named errors") {
    auto good = fixtures::make_las12_format0({{0, 0, 0}, {100, 100, 100}});

    SUBCASE("bad magic") {
        auto bad = good;
        bad[0] = std::byte('X');
        CHECK_THROWS_WITH_AS(pointcloud::parse_las(bad), doctest::Contains("magic"),
                             pointcloud::LasError);
    }
    SUBCASE("unsupported version") {
        auto bad = good;
        bad[25] = std::byte(1);  // 1.1
        CHECK_THROWS_WITH_AS(pointcloud::parse_las(bad), doctest::Contains("version"),
                             pointcloud::LasError);
    }
    SUBCASE("unsupported point format") {
        auto bad = good;
        bad[104] = std::byte(3);
        CHECK_THROWS_WITH_AS(pointcloud::parse_las(bad), doctest::Contains("format"),
                             pointcloud::LasError);
    }
    SUBCASE("truncated record names the byte offset") {
        auto bad = good;
        bad.resize(bad.size() - 7);  // mid-record
        CHECK_THROWS_WITH_AS(pointcloud::parse_las(bad), doctest::Contains("truncated"),
                             pointcloud::LasError);
    }
    SUBCASE("count mismatch") {
        auto bad = good;
        bad.resize(bad.size() - 20);  // one whole record short
        CHECK_THROWS_WITH_AS(pointcloud::parse_las(bad), doctest::Contains("count mismatch"),
                             pointcloud::LasError);
    }
    SUBCASE("laz flag rejected") {
        auto bad = good;
        bad[104] = std::byte(0x80);
        CHECK_THROWS_WITH_AS(pointcloud::parse_las(bad), doctest::Contains("LAZ"),
                             pointcloud::LasError);
    }
}

TEST_CASE("write_las -> parse_las roundtrip on 10k random points") {
    const PointTile tile = fixtures::random_tile(10000, {500.0, 1000.0, 900.0, 1400.0}, 42);
    const auto bytes = pointcloud::write_las(tile, {0.001});
    const PointTile back = pointcloud::parse_las(bytes);
    REQUIRE(back.points.size() == tile.points.size());

    double max_delta = 0.0;
    for (std::size_t i = 0; i < tile.points.size(); ++i) {
        max_delta = std::max(max_delta, std::abs(back.points[i].x - tile.points[i].x));
        max_delta = std::max(max_delta, std::abs(back.points[i].y - tile.points[i].y));
        max_delta = std::max(max_delta, std::abs(back.points[i].z - tile.points[i].z));
        CHECK(back.points[i].classification == tile.points[i].classification);
        CHECK(back.points[i].return_number == tile.points[i].return_number);
        CHECK(back.points[i].number_of_returns == tile.points[i].number_of_returns);
        CHECK(back.points[i].intensity == tile.points[i].intensity);
    }
    CHECK(max_delta <= 0.001);

    // LAS 1.4 / format 6 comes back out of the writer
    CHECK(static_cast<int>(bytes[24]) == 1);
    CHECK(static_cast<int>(bytes[25]) == 4);
    CHECK(static_cast<int>(bytes[104]) == 6);
}

TEST_CASE("parse-write-parse is bitwise stable beyond the first roundtrip") {
    const PointTile tile = fixtures::random_tile(2000, {0.0, 0.0, 100.0, 100.0}, 7);
    const auto first = pointcloud::write_las(pointcloud::parse_las(pointcloud::write_las(tile)));
    const auto second = pointcloud::write_las(pointcloud::parse_las(first));
    CHECK(first == second);
}

TEST_CASE("write_las rejects empty tiles and overflowing scales") {
    PointTile empty;
    empty.bounds = {0, 0, 1, 1};
    CHECK_THROWS(pointcloud::write_las(empty));

    PointTile wide;
    wide.bounds = {0, 0, 1e7, 1};
    wide.points.push_back({0.0, 0.0, 0.0, 0, 1, 1, 1});
    wide.points.push_back({5.0e6, 0.5, 0.0, 0, 1, 1, 1});
    CHECK_THROWS(pointcloud::write_las(wide, {1e-4}));  // 5e10 quanta > int32
    CHECK_NOTHROW(pointcloud::write_las(wide, {0.01}));
}

TEST_CASE("classification 2 survives the roundtrip exactly") {
    PointTile tile;
    tile.bounds = {0, 0, 10, 10};
    for (int i = 0; i < 10; ++i)
        tile.points.push_back({i * 1.0, i * 0.5, 1.0, 0, 2, 1, 1});
    const PointTile back = pointcloud::parse_las(pointcloud::write_las(tile));
    for (const auto& p : back.points)
        CHECK(p.classification == 2);
}

TEST_CASE("crop: half-open membership against the brute-force oracle") {
    const PointTile tile = fixtures::random_tile(10000, {0.0, 0.0, 100.0, 100.0}, 11);
    const Bounds bbox{25.0, 30.0, 60.0, 90.0};
    const PointTile cropped = pointcloud::crop(tile, bbox);
    const auto expected = oracles::brute_crop_indices(tile.points, bbox);
    REQUIRE(cropped.points.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(cropped.points[i].x == tile.points[expected[i]].x);
        CHECK(cropped.points[i].y == tile.points[expected[i]].y);
    }
    CHECK(cropped.bounds.minx == bbox.minx);
    CHECK(cropped.bounds.maxy == bbox.maxy);
}

TEST_CASE("crop: point exactly on the max edge is excluded") {
    PointTile tile;
    tile.bounds = {0, 0, 10, 10};
    tile.points.push_back({10.0, 5.0, 0.0, 0, 1, 1, 1});
    tile.points.push_back({5.0, 10.0, 0.0, 0, 1, 1, 1});
    tile.points.push_back({0.0, 0.0, 0.0, 0, 1, 1, 1});  // min edge included
    const PointTile cropped = pointcloud::crop(tile, tile.bounds);
    CHECK(cropped.points.size() == 1);

    // extending the max edge brings them back
    const PointTile all = pointcloud::crop(tile, {0, 0, 10.0001, 10.0001});
    CHECK(all.points.size() == 3);
}

TEST_CASE("crop is idempotent") {
    const PointTile tile = fixtures::random_tile(5000, {0.0, 0.0, 50.0, 50.0}, 3);
    const Bounds bbox{10.0, 10.0, 35.0, 40.0};
    const PointTile once = pointcloud::crop(tile, bbox);
    const PointTile twice = pointcloud::crop(once, bbox);
    REQUIRE(once.points.size() == twice.points.size());
    for (std::size_t i = 0; i < once.points.size(); ++i)
        CHECK(once.points[i].x == twice.points[i].x);
}

TEST_CASE("a bbox partition conserves the point multiset") {
    const PointTile tile = fixtures::random_tile(8000, {0.0, 0.0, 100.0, 100.0}, 17);
    std::size_t total = 0;
    std::vector<double> collected;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            // half-open cells; the outermost edge is stretched past the max
            const double maxx = i == 3 ? 100.0 + 1.0 : (i + 1) * 25.0;
            const double maxy = j == 3 ? 100.0 + 1.0 : (j + 1) * 25.0;
            const PointTile part =
                pointcloud::crop(tile, {i * 25.0, j * 25.0, maxx, maxy});
            total += part.points.size();
            for (const auto& p : part.points)
                collected.push_back(p.x * 1e6 + p.y);
        }
    }
    CHECK(total == tile.points.size());
    std::vector<double> original;
    for (const auto& p : tile.points)
        original.push_back(p.x * 1e6 + p.y);
    std::sort(collected.begin(), collected.end());
    std::sort(original.begin(), original.end());
    CHECK(collected == original);
}

TEST_CASE("parse_las: format 1 and LAS 1.3 payloads") {
    // format 1 = format 0 plus an 8-byte GPS time we skip
    auto bytes = fixtures::make_las12_format0({{100, 200, 300, 7, 1, 2, 2}, {400, 500, 600, 1, 2, 2, 3}},
                                              0.01);
    bytes[104] = std::byte(1);   // point format 1
    bytes[105] = std::byte(28);  // record length
    const std::size_t offset = 227;
    const std::size_t old_len = 20;
    std::vector<std::byte> fmt1(bytes.begin(), bytes.begin() + offset);
    for (int i = 0; i < 2; ++i) {
        fmt1.insert(fmt1.end(), bytes.begin() + offset + i * old_len,
                    bytes.begin() + offset + (i + 1) * old_len);
        for (int k = 0; k < 8; ++k)
            fmt1.push_back(std::byte(0));  // gps time
    }
    const PointTile tile = pointcloud::parse_las(fmt1);
    REQUIRE(tile.points.size() == 2);
    CHECK(tile.points[0].x == doctest::Approx(1.0));
    CHECK(tile.points[1].classification == 3);
    CHECK(tile.points[1].return_number == 2);

    // LAS 1.3: 8 extra header bytes (waveform offset)
    auto v13 = fixtures::make_las12_format0({{10, 20, 30, 0, 1, 1, 2}});
    v13[25] = std::byte(3);  // minor version
    v13.insert(v13.begin() + 227, 8, std::byte(0));
    v13[94] = std::byte(235);  // header size
    v13[96] = std::byte(235);  // offset to point data
    const PointTile t13 = pointcloud::parse_las(v13);
    REQUIRE(t13.points.size() == 1);
    CHECK(t13.points[0].classification == 2);
}

TEST_CASE("las 1.4 format 6 roundtrip carries 4-bit return fields") {
    PointTile tile;
    tile.bounds = {0, 0, 10, 10};
    for (int rn = 1; rn <= 12; ++rn)
        tile.points.push_back({1.0 * (rn % 10), 0.5 * rn, 2.0, 0, 1, static_cast<std::uint8_t>(rn),
                               static_cast<std::uint8_t>(12)});
    const PointTile back = pointcloud::parse_las(pointcloud::write_las(tile));
    REQUIRE(back.points.size() == 12);
    for (int i = 0; i < 12; ++i) {
        CHECK(back.points[i].return_number == i + 1);
        CHECK(back.points[i].number_of_returns == 12);
    }
}

}  // TEST_SUITE
