#include "downscale/grid.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "downscale/error.hpp"
#include "downscale/rng.hpp"

namespace dsc {

namespace {

constexpr double kEdgeTol = 1e-9;

bool near_integer(double x, double tol = kEdgeTol) { return std::abs(x - std::round(x)) <= tol; }

}  // namespace

GridSpec::GridSpec(double lat_min_, double lat_max_, double lon_min_, double lon_max_,
                   double resolution_)
    : lat_min(lat_min_), lat_max(lat_max_), lon_min(lon_min_), lon_max(lon_max_),
      resolution(resolution_) {
    require(resolution > 0.0, "GridSpec: resolution must be positive");
    require(lat_max > lat_min && lon_max > lon_min, "GridSpec: degenerate bounds");
    const double fl = (lat_max - lat_min) / resolution;
    const double fo = (lon_max - lon_min) / resolution;
    require(near_integer(fl, 1e-6) && near_integer(fo, 1e-6),
            "GridSpec: extent is not a whole number of cells");
    n_lat = static_cast<int>(std::llround(fl));
    n_lon = static_cast<int>(std::llround(fo));
    require(n_lat > 0 && n_lon > 0, "GridSpec: empty grid");
}

GridSpec full_domain(double resolution) {
    require(resolution > 0.0, "full_domain: resolution must be positive");
    return GridSpec(-60.0, 60.0, -130.0, 170.0, resolution);
}

namespace {

// Equal tripartition of the full domain: latitude bands N [20,60], T [-20,20],
// S [-60,-20]; longitude bands W [-130,-30], M [-30,70], E [70,170].
const double kLatEdges[4] = {60.0, 20.0, -20.0, -60.0};  // north to south
const double kLonEdges[4] = {-130.0, -30.0, 70.0, 170.0};
const char* kLatNames[3] = {"N", "T", "S"};
const char* kLonNames[3] = {"W", "M", "E"};

std::vector<Region> build_atomic() {
    std::vector<Region> out;
    for (int bi = 0; bi < 3; ++bi) {
        for (int bj = 0; bj < 3; ++bj) {
            Region r;
            r.id = std::string(kLatNames[bi]) + kLonNames[bj];
            r.members = {r.id};
            r.bbox = {kLatEdges[bi + 1], kLatEdges[bi], kLonEdges[bj], kLonEdges[bj + 1]};
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::vector<Region> build_all() {
    std::vector<Region> out = build_atomic();
    for (int bi = 0; bi < 3; ++bi) {  // latitude bands: N, T, S
        Region r;
        r.id = kLatNames[bi];
        for (int bj = 0; bj < 3; ++bj) r.members.push_back(std::string(kLatNames[bi]) + kLonNames[bj]);
        r.bbox = {kLatEdges[bi + 1], kLatEdges[bi], kLonEdges[0], kLonEdges[3]};
        out.push_back(std::move(r));
    }
    for (int bj = 0; bj < 3; ++bj) {  // longitude bands: W, M, E
        Region r;
        r.id = kLonNames[bj];
        for (int bi = 0; bi < 3; ++bi) r.members.push_back(std::string(kLatNames[bi]) + kLonNames[bj]);
        r.bbox = {kLatEdges[3], kLatEdges[0], kLonEdges[bj], kLonEdges[bj + 1]};
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

std::vector<Region> partition() { return build_atomic(); }

std::vector<Region> training_domains() { return build_all(); }

const Region& region_by_id(const std::string& id) {
    static const std::vector<Region> all = build_all();
    for (const auto& r : all) {
        if (r.id == id) return r;
    }
    throw Error("unknown region id: " + id);
}

namespace {

int edge_index(const GridSpec& grid, double value, double origin, const char* what) {
    const double f = (value - origin) / grid.resolution;
    if (!near_integer(f, 1e-6)) {
        throw Error(std::string("slice: region edge ") + what + " = " + std::to_string(value) +
                    " does not align to cell edges at resolution " +
                    std::to_string(grid.resolution));
    }
    return static_cast<int>(std::llround(f));
}

}  // namespace

IndexBox slice_one(const GridSpec& grid, const std::string& member_id) {
    const Region& m = region_by_id(member_id);
    require(m.atomic(), "slice_one: not an atomic region: " + member_id);
    const BBox& b = m.bbox;
    require(b.lat_min >= grid.lat_min - kEdgeTol && b.lat_max <= grid.lat_max + kEdgeTol &&
                b.lon_min >= grid.lon_min - kEdgeTol && b.lon_max <= grid.lon_max + kEdgeTol,
            "slice: region " + member_id + " outside grid bounds");
    IndexBox box;
    box.lat_begin = edge_index(grid, b.lat_min, grid.lat_min, "lat_min");
    box.lat_end = edge_index(grid, b.lat_max, grid.lat_min, "lat_max");
    box.lon_begin = edge_index(grid, b.lon_min, grid.lon_min, "lon_min");
    box.lon_end = edge_index(grid, b.lon_max, grid.lon_min, "lon_max");
    return box;
}

std::vector<IndexBox> slice(const GridSpec& grid, const Region& region) {
    std::vector<IndexBox> out;
    out.reserve(region.members.size());
    for (const auto& id : region.members) out.push_back(slice_one(grid, id));
    return out;
}

PatchCoords sample_patch(const GridSpec& lr_grid, const GridSpec& hr_grid, const Region& region,
                         int lr_size, std::uint64_t seed) {
    require(lr_size > 0, "sample_patch: lr_size must be positive");
    const double ratio = lr_grid.resolution / hr_grid.resolution;
    const double hr_size_f = lr_size * ratio;
    if (!near_integer(hr_size_f)) {
        throw Error("sample_patch: lr_size * " + std::to_string(ratio) +
                    " is not an integer (lr_size " + std::to_string(lr_size) + ")");
    }
    const int hr_size = static_cast<int>(std::llround(hr_size_f));

    // LR window edges must land on HR cell edges, i.e. index*ratio integral.
    // With ratio 5/2 that means even LR offsets; the general step is the
    // smallest s with s*ratio integral, probed up to the member extent.
    int step = 1;
    while (step <= 1024 && !near_integer(step * ratio)) ++step;
    require(near_integer(step * ratio), "sample_patch: incompatible grid resolutions");

    SplitMix64 rng(mix_seed(seed, 0x70617463 /*"patc"*/));

    // Pick the member by bbox area (members are equal-area here, but the
    // weighting keeps composites correct for arbitrary regions).
    double total = 0.0;
    for (const auto& id : region.members) total += region_by_id(id).bbox.area();
    double pick = rng.uniform() * total;
    const std::string* member = &region.members.back();
    for (const auto& id : region.members) {
        pick -= region_by_id(id).bbox.area();
        if (pick <= 0.0) {
            member = &id;
            break;
        }
    }

    const IndexBox lr_box = slice_one(lr_grid, *member);
    const int span_lat = lr_box.n_lat() - lr_size;
    const int span_lon = lr_box.n_lon() - lr_size;
    if (span_lat < 0 || span_lon < 0) {
        throw Error("sample_patch: patch of " + std::to_string(lr_size) +
                    " LR cells does not fit member " + *member);
    }
    // Member origins align to HR edges by construction (region edges align on
    // both grids), so offsets are drawn on the step lattice within the member.
    const int n_lat_choices = span_lat / step + 1;
    const int n_lon_choices = span_lon / step + 1;
    const int i0 = lr_box.lat_begin + step * static_cast<int>(rng.below(n_lat_choices));
    const int j0 = lr_box.lon_begin + step * static_cast<int>(rng.below(n_lon_choices));

    PatchCoords pc;
    pc.member_id = *member;
    pc.lr = {i0, i0 + lr_size, j0, j0 + lr_size};
    const double lat0 = lr_grid.lat_min + i0 * lr_grid.resolution;
    const double lon0 = lr_grid.lon_min + j0 * lr_grid.resolution;
    const int hi0 = edge_index(hr_grid, lat0, hr_grid.lat_min, "patch lat");
    const int hj0 = edge_index(hr_grid, lon0, hr_grid.lon_min, "patch lon");
    pc.hr = {hi0, hi0 + hr_size, hj0, hj0 + hr_size};
    return pc;
}

std::string regions_json() {
    nlohmann::json doc;
    doc["domain"] = {{"lat_min", -60.0}, {"lat_max", 60.0}, {"lon_min", -130.0}, {"lon_max", 170.0}};
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& r : training_domains()) {
        regions.push_back({{"id", r.id},
                           {"members", r.members},
                           {"bbox",
                            {{"lat_min", r.bbox.lat_min},
                             {"lat_max", r.bbox.lat_max},
                             {"lon_min", r.bbox.lon_min},
                             {"lon_max", r.bbox.lon_max}}}});
    }
    doc["regions"] = regions;
    return doc.dump(2) + "\n";
}

}  // namespace dsc
