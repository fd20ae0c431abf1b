#include "alspipe/sampler.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>

using namespace alspipe;
using raster::LandCoverL1;
using raster::SlopeClass;
using sampler::JointKey;
using sampler::PatchLabel;

namespace {

PatchLabel make_label(LandCoverL1 lc, SlopeClass slope, double minx = 0.0, double miny = 0.0,
                      const std::string& project = "proj") {
    PatchLabel label;
    label.bbox = {minx, miny, minx + 500.0, miny + 500.0};
    label.landcover = lc;
    label.slope = slope;
    label.project_id = project;
    label.nlcd_year = 2019;
    return label;
}

std::vector<PatchLabel> make_pool(const std::map<JointKey, std::size_t>& counts) {
    std::vector<PatchLabel> pool;
    double x = 0.0;
    for (const auto& [key, n] : counts) {
        for (std::size_t i = 0; i < n; ++i) {
            pool.push_back(make_label(key.landcover, key.slope, x));
            x += 500.0;
        }
    }
    return pool;
}

// Uniform (property-constant) raster in class units.
raster::RasterGrid class_grid(int width, int height, double cell, float value) {
    raster::RasterGrid g(width, height, 0.0, height * cell, cell, -9999.0f,
                         {raster::CrsTag::Kind::Utm, 18, geo::Hemisphere::North});
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c)
            g.set(r, c, value);
    return g;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("select_nlcd_year: exact, nearest, tie to later, clamp") {
    const std::vector<int> years = {2001, 2004, 2006, 2008, 2011, 2013, 2016, 2019, 2021};
    CHECK(sampler::select_nlcd_year(2019, years) == 2019);
    CHECK(sampler::select_nlcd_year(2020, years) == 2021);  // tie -> later
    CHECK(sampler::select_nlcd_year(1995, years) == 2001);
    CHECK(sampler::select_nlcd_year(2030, years) == 2021);
    CHECK(sampler::select_nlcd_year(2012, years) == 2013);  // tie -> later
    CHECK_THROWS(sampler::select_nlcd_year(2019, {}));
}

TEST_CASE("label_patches: uniform 1000 m region gives 4 patches") {
    // 34 cells of 30 m = 1020 m => floor(1020/500) = 2 patches per axis
    const auto lc = class_grid(34, 34, 30.0, static_cast<float>(LandCoverL1::Forest));
    const auto sc = class_grid(34, 34, 30.0, static_cast<float>(SlopeClass::Flat));
    const auto result = sampler::label_patches(lc, sc, {}, 500.0, "p1", 2019);
    REQUIRE(result.labels.size() == 4);
    CHECK(result.grid_rows == 2);
    CHECK(result.grid_cols == 2);
    for (const auto& label : result.labels) {
        CHECK(label.landcover == LandCoverL1::Forest);
        CHECK(label.slope == SlopeClass::Flat);
        CHECK(label.bbox.maxx - label.bbox.minx == doctest::Approx(500.0));
        CHECK(label.project_id == "p1");
        CHECK(label.nlcd_year == 2019);
    }
}

TEST_CASE("label_patches: 60/40 mix labels by mode") {
    auto lc = class_grid(20, 20, 30.0, static_cast<float>(LandCoverL1::Forest));
    // make 40% of cells Developed
    int flipped = 0;
    for (int r = 0; r < 20 && flipped < 160; ++r)
        for (int c = 0; c < 20 && flipped < 160; ++c, ++flipped)
            lc.set(r, c, static_cast<float>(LandCoverL1::Developed));
    const auto sc = class_grid(20, 20, 30.0, static_cast<float>(SlopeClass::Sloped));
    const auto result = sampler::label_patches(lc, sc, {}, 500.0, "p1", 2019);
    REQUIRE(result.labels.size() == 1);
    CHECK(result.labels[0].landcover == LandCoverL1::Forest);
    CHECK(result.labels[0].slope == SlopeClass::Sloped);
}

TEST_CASE("label_patches: modal tie goes to the lower Table-1 class") {
    // exactly half Developed, half Forest
    auto lc = class_grid(10, 10, 50.0, static_cast<float>(LandCoverL1::Forest));
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 10; ++c)
            lc.set(r, c, static_cast<float>(LandCoverL1::Developed));
    const auto sc = class_grid(10, 10, 50.0, static_cast<float>(SlopeClass::Flat));
    const auto result = sampler::label_patches(lc, sc, {}, 500.0, "p1", 2019);
    REQUIRE(result.labels.size() == 1);
    CHECK(result.labels[0].landcover == LandCoverL1::Developed);  // Developed < Forest
}

TEST_CASE("label_patches: nodata-dominated patches and outside centers drop") {
    auto lc = class_grid(34, 34, 30.0, static_cast<float>(LandCoverL1::Developed));
    const auto sc = class_grid(34, 34, 30.0, static_cast<float>(SlopeClass::Flat));
    // poison the lower-left patch beyond 50%
    for (int r = 17; r < 34; ++r)
        for (int c = 0; c < 17; ++c)
            lc.set(r, c, lc.nodata());
    const auto result = sampler::label_patches(lc, sc, {}, 500.0, "p1", 2019);
    CHECK(result.labels.size() == 3);
    CHECK(result.dropped_nodata == 1);

    // boundary covering only the left half: right-column patch centers fall outside
    geo::Polygon left;
    left.exterior = {{0, 0}, {510, 0}, {510, 1020}, {0, 1020}, {0, 0}};
    const auto bounded = sampler::label_patches(class_grid(34, 34, 30.0, 3.0f), sc, {left}, 500.0,
                                                "p1", 2019);
    CHECK(bounded.labels.size() == 2);
    CHECK(bounded.dropped_outside == 2);
}

TEST_CASE("label_patches rejects mismatched grids") {
    const auto lc = class_grid(20, 20, 30.0, 1.0f);
    const auto sc = class_grid(20, 20, 25.0, 0.0f);
    CHECK_THROWS(sampler::label_patches(lc, sc, {}, 500.0, "p1", 2019));
}

TEST_CASE("joint_distribution: counts and conservation") {
    std::vector<PatchLabel> labels;
    for (int i = 0; i < 8; ++i)
        labels.push_back(make_label(LandCoverL1::Developed, SlopeClass::Flat, i * 500.0));
    for (int i = 0; i < 2; ++i)
        labels.push_back(make_label(LandCoverL1::Forest, SlopeClass::Steep, (8 + i) * 500.0));
    const auto dist = sampler::joint_distribution(labels);
    CHECK(dist.total == 10);
    CHECK(dist.probability({LandCoverL1::Developed, SlopeClass::Flat}) == doctest::Approx(0.8));
    CHECK(dist.probability({LandCoverL1::Forest, SlopeClass::Steep}) == doctest::Approx(0.2));
    std::size_t sum = 0;
    for (const auto& [k, v] : dist.counts)
        sum += v;
    CHECK(sum == labels.size());
    CHECK_THROWS(sampler::joint_distribution({}));
}

TEST_CASE("inverse_probability_sample: constant weights reduce to uniform WOR") {
    const auto pool = make_pool({{{LandCoverL1::Forest, SlopeClass::Flat}, 50}});
    const auto dist = sampler::joint_distribution(pool);
    const auto picked = sampler::inverse_probability_sample(pool, dist, 10, 1234);
    CHECK(picked.size() == 10);
    // no duplicates
    std::set<double> seen;
    for (const auto& label : picked)
        CHECK(seen.insert(label.bbox.minx).second);
}

TEST_CASE("inverse_probability_sample: n beyond pool returns everything") {
    const auto pool = make_pool({{{LandCoverL1::Developed, SlopeClass::Flat}, 7}});
    const auto dist = sampler::joint_distribution(pool);
    CHECK(sampler::inverse_probability_sample(pool, dist, 100, 5).size() == 7);
    CHECK(sampler::inverse_probability_sample(pool, dist, 0, 5).empty());
}

TEST_CASE("inverse_probability_sample: disallowed classes never appear") {
    auto pool = make_pool({{{LandCoverL1::Water, SlopeClass::Flat}, 50},
                           {{LandCoverL1::Developed, SlopeClass::Flat}, 5}});
    const auto dist = sampler::joint_distribution(pool);
    const auto picked = sampler::inverse_probability_sample(pool, dist, 20, 99);
    CHECK(picked.size() == 5);
    for (const auto& label : picked)
        CHECK(label.landcover == LandCoverL1::Developed);

    // all-filtered pool -> empty result, no error
    const auto water_only = make_pool({{{LandCoverL1::Water, SlopeClass::Flat}, 10}});
    CHECK(sampler::inverse_probability_sample(water_only, sampler::joint_distribution(water_only),
                                              5, 1)
              .empty());
}

TEST_CASE("inverse_probability_sample balances a 900/100 pool over seeds") {
    const JointKey dev_flat{LandCoverL1::Developed, SlopeClass::Flat};
    const JointKey for_steep{LandCoverL1::Forest, SlopeClass::Steep};
    const auto pool = make_pool({{dev_flat, 900}, {for_steep, 100}});
    const auto dist = sampler::joint_distribution(pool);

    double mean_dev = 0.0, mean_for = 0.0;
    const int seeds = 1000;
    for (int seed = 0; seed < seeds; ++seed) {
        const auto picked = sampler::inverse_probability_sample(pool, dist, 100, seed);
        REQUIRE(picked.size() == 100);
        std::size_t dev = 0;
        for (const auto& label : picked)
            dev += label.joint() == dev_flat ? 1 : 0;
        mean_dev += static_cast<double>(dev);
        mean_for += static_cast<double>(100 - dev);
    }
    mean_dev /= seeds;
    mean_for /= seeds;
    CHECK(mean_dev == doctest::Approx(50.0).epsilon(0.10));
    CHECK(mean_for == doctest::Approx(50.0).epsilon(0.10));
}

TEST_CASE("balancing ratio <= 1.25 while uniform sampling mirrors pool imbalance") {
    const JointKey dev_flat{LandCoverL1::Developed, SlopeClass::Flat};
    const JointKey dev_sloped{LandCoverL1::Developed, SlopeClass::Sloped};
    const JointKey for_flat{LandCoverL1::Forest, SlopeClass::Flat};
    const JointKey for_steep{LandCoverL1::Forest, SlopeClass::Steep};
    const auto pool = make_pool(
        {{dev_flat, 800}, {dev_sloped, 100}, {for_flat, 50}, {for_steep, 50}});
    const auto dist = sampler::joint_distribution(pool);

    const int seeds = 500;
    std::map<JointKey, double> inverse_mean, uniform_mean;
    for (int seed = 0; seed < seeds; ++seed) {
        for (const auto& label : sampler::inverse_probability_sample(pool, dist, 100, seed))
            inverse_mean[label.joint()] += 1.0;
        fixtures::Rng rng(static_cast<std::uint64_t>(seed) + 50000);
        for (std::size_t idx : alspipe::sample_indices(pool.size(), 100, rng))
            uniform_mean[pool[idx].joint()] += 1.0;
    }
    double inv_min = 1e18, inv_max = 0.0, uni_min = 1e18, uni_max = 0.0;
    for (const auto& key : {dev_flat, dev_sloped, for_flat, for_steep}) {
        inv_min = std::min(inv_min, inverse_mean[key] / seeds);
        inv_max = std::max(inv_max, inverse_mean[key] / seeds);
        uni_min = std::min(uni_min, uniform_mean[key] / seeds);
        uni_max = std::max(uni_max, uniform_mean[key] / seeds);
    }
    CHECK(inv_max / inv_min <= 1.25);
    CHECK(uni_max / uni_min >= 15.0);  // pool imbalance ratio is 800/50 = 16
}

TEST_CASE("inverse_probability_sample is deterministic per seed") {
    const auto pool = make_pool({{{LandCoverL1::Developed, SlopeClass::Flat}, 200},
                                 {{LandCoverL1::Forest, SlopeClass::Sloped}, 50}});
    const auto dist = sampler::joint_distribution(pool);
    const auto a = sampler::inverse_probability_sample(pool, dist, 30, 777);
    const auto b = sampler::inverse_probability_sample(pool, dist, 30, 777);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].bbox.minx == b[i].bbox.minx);  // identical selection order
    const auto c = sampler::inverse_probability_sample(pool, dist, 30, 778);
    bool different = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        different |= a[i].bbox.minx != c[i].bbox.minx;
    CHECK(different);
}

TEST_CASE("build_manifest: cap arithmetic and summary conservation") {
    std::vector<sampler::ProjectSelection> selections;
    for (int p = 0; p < 3; ++p) {
        sampler::ProjectSelection sel;
        sel.project_id = "proj" + std::to_string(p);
        sel.epsg = 32618;
        sel.source_url = "corpus/proj" + std::to_string(p) + "/pointcloud.las";
        for (int i = 0; i < 50; ++i)
            sel.selected.push_back(make_label(LandCoverL1::Forest,
                                              i % 2 ? SlopeClass::Flat : SlopeClass::Steep,
                                              i * 500.0, 0.0, sel.project_id));
        selections.push_back(std::move(sel));
    }
    const auto manifest = sampler::build_manifest(selections, 40, 9);
    CHECK(manifest.entries.size() == 120);
    std::size_t summary_total = 0;
    for (const auto& [k, v] : manifest.summary())
        summary_total += v;
    CHECK(summary_total == manifest.entries.size());

    // duplicate bbox within a project trips the invariant
    selections[0].selected.push_back(selections[0].selected.front());
    selections[0].selected.back().slope = SlopeClass::Sloped;
    CHECK_THROWS(sampler::build_manifest(selections, 60, 9));
}

TEST_CASE("manifest jsonl: stable bytes, 3-decimal coords, parse roundtrip") {
    sampler::ProjectSelection sel;
    sel.project_id = "alpha";
    sel.epsg = 32618;
    sel.source_url = "http://example/alpha/pointcloud.las";
    sel.selected.push_back(make_label(LandCoverL1::Developed, SlopeClass::Flat, 1234.5));
    sel.selected.push_back(make_label(LandCoverL1::Forest, SlopeClass::Steep, 2000.125));
    const auto manifest = sampler::build_manifest({sel}, 40, 31);

    const std::string jsonl = sampler::manifest_to_jsonl(manifest);
    CHECK(jsonl == sampler::manifest_to_jsonl(manifest));  // determinism
    CHECK(jsonl.find("\"minx\":1234.500") != std::string::npos);
    CHECK(jsonl.find("\"minx\":2000.125") != std::string::npos);
    CHECK(jsonl.find("\"epsg\":32618") != std::string::npos);

    const auto back = sampler::parse_manifest_jsonl(jsonl);
    REQUIRE(back.entries.size() == 2);
    CHECK(back.entries[0].project_id == "alpha");
    CHECK(back.entries[0].landcover == LandCoverL1::Developed);
    CHECK(back.entries[1].slope == SlopeClass::Steep);
    CHECK(back.entries[1].bbox.minx == doctest::Approx(2000.125));

    const std::string summary = sampler::manifest_summary_json(manifest);
    CHECK(summary.find("\"All\": 2") != std::string::npos);
}

}  // TEST_SUITE
