#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dsc {

// Regular lat-lon raster. Cell (i, j) is centered at
// (lat_min + (i+0.5)*resolution, lon_min + (j+0.5)*resolution); the latitude
// index grows northward. Longitudes live in [-130, 170] without wraparound.
struct GridSpec {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;
    double resolution = 0.0;
    int n_lat = 0;
    int n_lon = 0;

    GridSpec() = default;
    GridSpec(double lat_min, double lat_max, double lon_min, double lon_max, double resolution);

    double lat_center(int i) const { return lat_min + (i + 0.5) * resolution; }
    double lon_center(int j) const { return lon_min + (j + 0.5) * resolution; }
    std::int64_t cell_count() const { return static_cast<std::int64_t>(n_lat) * n_lon; }

    bool operator==(const GridSpec&) const = default;
};

// The paper's full analysis domain, 60S-60N x 130W-170E, at the requested
// cell size (0.25 for the predictor grid, 0.1 for the target grid).
GridSpec full_domain(double resolution);

// Half-open index window [lat_begin, lat_end) x [lon_begin, lon_end).
struct IndexBox {
    int lat_begin = 0;
    int lat_end = 0;
    int lon_begin = 0;
    int lon_end = 0;

    int n_lat() const { return lat_end - lat_begin; }
    int n_lon() const { return lon_end - lon_begin; }
    bool operator==(const IndexBox&) const = default;
};

struct BBox {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;

    double area() const { return (lat_max - lat_min) * (lon_max - lon_min); }
    bool operator==(const BBox&) const = default;
};

// A named training/evaluation domain. Atomic regions list themselves as their
// only member; composites list their three atomic members. Boxes are closed on
// the south/west edge and open on the north/east edge, so the nine atomic
// regions tile the domain disjointly.
struct Region {
    std::string id;
    std::vector<std::string> members;
    BBox bbox;

    bool atomic() const { return members.size() == 1; }
};

// The nine atomic subregions (NW NM NE / TW TM TE / SW SM SE), row-major
// north-to-south, west-to-east.
std::vector<Region> partition();

// 15 domains: the nine atomic regions plus the latitude composites N, T, S and
// the longitude composites W, M, E.
std::vector<Region> training_domains();

const Region& region_by_id(const std::string& id);

// Index ranges covering exactly the region's cells, one box per member.
// The region's bbox edges must align with cell edges of `grid`.
std::vector<IndexBox> slice(const GridSpec& grid, const Region& region);

IndexBox slice_one(const GridSpec& grid, const std::string& member_id);

// A co-located LR/HR window pair. Both boxes cover the identical geographic
// extent; hr spans round(ratio)*... = lr_size * (lr.resolution / hr.resolution)
// cells per axis.
struct PatchCoords {
    std::string member_id;
    IndexBox lr;
    IndexBox hr;
};

// Deterministic training-crop sampler. Picks a member subregion with
// probability proportional to bbox area, then a uniformly placed LR window of
// lr_size x lr_size cells whose edges land on HR cell edges. Errors if
// lr_size * (lr_res/hr_res) is not an integer or the patch does not fit.
PatchCoords sample_patch(const GridSpec& lr_grid, const GridSpec& hr_grid, const Region& region,
                         int lr_size, std::uint64_t seed);

// Region definitions as a JSON document (ids, members, bbox degrees).
std::string regions_json();

}  // namespace dsc
