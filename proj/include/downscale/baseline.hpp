#pragma once

#include <vector>

#include "downscale/grid.hpp"
#include "downscale/store.hpp"

namespace dsc {

// Bilinear interpolation between cell centers, edge-replicated outside the
// outermost centers. Requires the target extent to lie inside the source
// extent. Values stay inside [min, max] of the source (convex weights).
std::vector<double> bilinear_upsample(const std::vector<double>& lr_values,
                                      const GridSpec& source, const GridSpec& target);

// The reference forecast: per-hour bilinear upsample of raw total
// precipitation (mm/h, untransformed) from the LR grid to the HR cells of
// `region`. Writes chunks in the datastore format, one store per member
// subregion under out_dir/<member_id>/.
void baseline_forecast(const Store& store, const Region& region, const HourRange& hours,
                       const std::string& out_dir);

// One hour of the baseline over an HR window, for in-memory scoring.
std::vector<double> baseline_hour(const Store& store, EpochHour t, const IndexBox& hr_box);

}  // namespace dsc
