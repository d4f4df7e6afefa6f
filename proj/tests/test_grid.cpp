#include <doctest.h>

#include <algorithm>
#include <nlohmann/json.hpp>
#include <set>

#include "downscale/error.hpp"
#include "downscale/grid.hpp"

using namespace dsc;

TEST_CASE("full domain cell counts at the paper resolutions") {
    const GridSpec hr = full_domain(0.1);
    CHECK(hr.n_lat == 1200);
    CHECK(hr.n_lon == 3000);
    const GridSpec lr = full_domain(0.25);
    CHECK(lr.n_lat == 480);
    CHECK(lr.n_lon == 1200);
    CHECK_THROWS_AS(full_domain(-1.0), Error);
    CHECK_THROWS_AS(full_domain(0.0), Error);
}

TEST_CASE("cell centers follow the half-cell convention") {
    const GridSpec g = full_domain(0.25);
    CHECK(g.lat_center(0) == doctest::Approx(-59.875));
    CHECK(g.lon_center(0) == doctest::Approx(-129.875));
    CHECK(g.lat_center(g.n_lat - 1) == doctest::Approx(59.875));
}

TEST_CASE("partition: nine atomic regions with the forced tripartition") {
    const auto regions = partition();
    REQUIRE(regions.size() == 9);
    CHECK(regions[0].id == "NW");
    CHECK(regions[0].bbox.lat_min == 20.0);
    CHECK(regions[0].bbox.lat_max == 60.0);
    CHECK(regions[0].bbox.lon_min == -130.0);
    CHECK(regions[0].bbox.lon_max == -30.0);
    CHECK(regions[4].id == "TM");
    CHECK(regions[4].bbox.lat_min == -20.0);
    CHECK(regions[4].bbox.lat_max == 20.0);
    CHECK(regions[4].bbox.lon_min == -30.0);
    CHECK(regions[4].bbox.lon_max == 70.0);

    const GridSpec hr = full_domain(0.1);
    for (const auto& r : regions) {
        const IndexBox box = slice_one(hr, r.id);
        CHECK(box.n_lat() == 400);
        CHECK(box.n_lon() == 1000);
    }
}

TEST_CASE("training domains: 9 atomic + 6 composites") {
    const auto domains = training_domains();
    REQUIRE(domains.size() == 15);
    const Region& s = region_by_id("S");
    CHECK(s.members == std::vector<std::string>{"SW", "SM", "SE"});
    const Region& n = region_by_id("N");
    CHECK(n.members == std::vector<std::string>{"NW", "NM", "NE"});
    const Region& m = region_by_id("M");
    CHECK(m.members == std::vector<std::string>{"NM", "TM", "SM"});

    // Every atomic region appears in exactly one latitude composite and one
    // longitude composite.
    for (const auto& atom : partition()) {
        int lat_hits = 0, lon_hits = 0;
        for (const char* id : {"N", "T", "S"}) {
            const Region& c = region_by_id(id);
            lat_hits += std::count(c.members.begin(), c.members.end(), atom.id);
        }
        for (const char* id : {"W", "M", "E"}) {
            const Region& c = region_by_id(id);
            lon_hits += std::count(c.members.begin(), c.members.end(), atom.id);
        }
        CHECK(lat_hits == 1);
        CHECK(lon_hits == 1);
    }
}

TEST_CASE("exhaustive disjoint tiling at both paper resolutions") {
    for (double res : {0.25, 0.1}) {
        const GridSpec g = full_domain(res);
        std::vector<std::uint8_t> covered(static_cast<std::size_t>(g.cell_count()), 0);
        for (const auto& r : partition()) {
            const IndexBox box = slice_one(g, r.id);
            for (int i = box.lat_begin; i < box.lat_end; ++i) {
                for (int j = box.lon_begin; j < box.lon_end; ++j) {
                    ++covered[static_cast<std::size_t>(i) * g.n_lon + j];
                }
            }
        }
        CHECK(std::all_of(covered.begin(), covered.end(),
                          [](std::uint8_t c) { return c == 1; }));
    }
}

TEST_CASE("slice of a composite yields one box per member") {
    const GridSpec g = full_domain(0.25);
    const auto boxes = slice(g, region_by_id("T"));
    REQUIRE(boxes.size() == 3);
    CHECK(boxes[0] == slice_one(g, "TW"));
    CHECK(boxes[2] == slice_one(g, "TE"));
}

TEST_CASE("slice rejects misaligned bounding boxes") {
    // 0.75 tiles the full domain but puts the 20N band edge off-lattice.
    const GridSpec g(-60.0, 60.0, -130.0, 170.0, 0.75);
    CHECK_THROWS_WITH_AS(slice_one(g, "NW"), doctest::Contains("does not align"), Error);
}

TEST_CASE("sample_patch size algebra") {
    const GridSpec lr = full_domain(0.25);
    const GridSpec hr = full_domain(0.1);
    const Region& nw = region_by_id("NW");

    const PatchCoords p32 = sample_patch(lr, hr, nw, 32, 5);
    CHECK(p32.hr.n_lat() == 80);
    CHECK(p32.hr.n_lon() == 80);
    const PatchCoords p30 = sample_patch(lr, hr, nw, 30, 5);
    CHECK(p30.hr.n_lat() == 75);
    CHECK_THROWS_WITH_AS(sample_patch(lr, hr, nw, 33, 5), doctest::Contains("not an integer"),
                         Error);
    CHECK_THROWS_AS(sample_patch(lr, hr, nw, 4000, 5), Error);  // larger than the subregion
}

TEST_CASE("sample_patch: identical seeds are bit-identical, patches stay in-region") {
    const GridSpec lr = full_domain(0.25);
    const GridSpec hr = full_domain(0.1);
    const Region& t = region_by_id("T");
    for (std::uint64_t seed : {1ull, 42ull, 987654321ull}) {
        const PatchCoords a = sample_patch(lr, hr, t, 32, seed);
        const PatchCoords b = sample_patch(lr, hr, t, 32, seed);
        CHECK(a.member_id == b.member_id);
        CHECK(a.lr == b.lr);
        CHECK(a.hr == b.hr);
        const IndexBox member = slice_one(lr, a.member_id);
        CHECK(a.lr.lat_begin >= member.lat_begin);
        CHECK(a.lr.lat_end <= member.lat_end);
        CHECK(a.lr.lon_begin >= member.lon_begin);
        CHECK(a.lr.lon_end <= member.lon_end);
    }
}

TEST_CASE("sample_patch: LR and HR windows share the exact geographic bbox") {
    const GridSpec lr = full_domain(0.25);
    const GridSpec hr = full_domain(0.1);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const PatchCoords p = sample_patch(lr, hr, region_by_id("E"), 32, seed);
        // Cell-edge algebra through the exact index relation (0.1 * hr index
        // equals 0.25 * lr index at shared edges).
        CHECK(p.hr.lat_begin * 2 == p.lr.lat_begin * 5);
        CHECK(p.hr.lat_end * 2 == p.lr.lat_end * 5);
        CHECK(p.hr.lon_begin * 2 == p.lr.lon_begin * 5);
        CHECK(p.hr.lon_end * 2 == p.lr.lon_end * 5);
    }
}

TEST_CASE("sample_patch hits every member of a composite") {
    const GridSpec lr = full_domain(0.25);
    const GridSpec hr = full_domain(0.1);
    const Region& w = region_by_id("W");
    std::set<std::string> seen;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
        seen.insert(sample_patch(lr, hr, w, 32, seed).member_id);
    }
    CHECK(seen == std::set<std::string>{"NW", "TW", "SW"});
}

TEST_CASE("region JSON export carries ids, members and bboxes") {
    const auto doc = nlohmann::json::parse(regions_json());
    CHECK(doc.at("regions").size() == 15);
    bool found_sw = false;
    for (const auto& r : doc.at("regions")) {
        if (r.at("id") == "SW") {
            found_sw = true;
            CHECK(r.at("bbox").at("lat_max").get<double>() == -20.0);
            CHECK(r.at("members").size() == 1);
        }
    }
    CHECK(found_sw);
}
