#pragma once

#include <cstdint>
#include <vector>

#include "downscale/batch.hpp"
#include "downscale/losses.hpp"
#include "downscale/nn.hpp"
#include "downscale/score.hpp"
#include "downscale/store.hpp"
#include "downscale/transform.hpp"

namespace dsc {

// m generator draws with independent noise for one hour and window pair,
// denormalized and inverse-log-transformed to mm/h (never negative). Members
// are batched through a single forward pass.
EnsembleForecast sample_ensemble(const Generator& gen, const NormStats& stats,
                                 const Store& store, const IndexBox& lr_box,
                                 const IndexBox& hr_box, EpochHour time, int members,
                                 std::uint64_t seed);

// The LR window co-located with an HR region window (exact cell-edge algebra).
IndexBox lr_box_for(const GridSpec& lr_grid, const GridSpec& hr_grid, const IndexBox& hr_box);

}  // namespace dsc
