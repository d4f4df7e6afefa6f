#pragma once

#include <map>
#include <string>
#include <vector>

#include "downscale/grid.hpp"
#include "downscale/store.hpp"
#include "downscale/timeutil.hpp"

namespace dsc {

// log(x + 1e-5) for precipitation in mm/h; x must be >= 0.
double log_fwd(double x);

// Inverse transform, clamped so round trips of x = 0 are exact.
double log_inv(double z);

constexpr double kLogEps = 1e-5;

struct VarStats {
    double mean = 0.0;
    double std = 1.0;
    bool log_transformed = false;
};

enum class StatsScope { train_region, full_domain };

// Per-variable global mean/std over the training selection. Precipitation
// variables are accumulated in log space; the land-sea mask keeps identity
// stats and passes through unchanged.
struct NormStats {
    std::map<std::string, VarStats> vars;
    std::string region_id;
    HourRange hours;
    StatsScope scope = StatsScope::train_region;

    const VarStats& for_variable(const std::string& name) const;

    std::string to_json() const;
    static NormStats from_json(const std::string& text);
};

// Single-pass streaming moments with an associative merge, so chunk partials
// can be combined in any grouping without changing the result materially.
struct RunningMoments {
    std::int64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x);
    void merge(const RunningMoments& other);
    double variance() const { return count > 0 ? m2 / count : 0.0; }
};

// Streams over every cell and hour of the region (or the full domain when
// scope says so) within `hours`; missing cells are excluded. Errors on an
// empty selection or zero variance.
NormStats compute_stats(const Store& store, const Region& region, const HourRange& hours,
                        StatsScope scope = StatsScope::train_region);

// (x - mean)/std after the log transform where flagged. The inverse composes
// the reverse steps; normalize then denormalize is the identity within 1e-6.
double normalize_value(double x, const VarStats& s);
double denormalize_value(double z, const VarStats& s);

void normalize_span(std::vector<double>& values, const VarStats& s);
void denormalize_span(std::vector<double>& values, const VarStats& s);

}  // namespace dsc
