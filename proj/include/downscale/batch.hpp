#pragma once

#include <cstdint>
#include <vector>

#include "downscale/grid.hpp"
#include "downscale/store.hpp"
#include "downscale/transform.hpp"

namespace dsc {

// One normalized training sample. lr stacks the nine predictors followed by
// the noise channels; hr_static is [lsm, orog] with orog standardized and lsm
// raw; hr_target is the normalized log target. All planes cover the same
// geographic extent.
struct TrainingBatch {
    int lr_h = 0, lr_w = 0;
    int hr_h = 0, hr_w = 0;
    int noise_channels = 0;
    std::vector<double> lr;         // [9 + noise_channels, lr_h, lr_w]
    std::vector<double> hr_static;  // [2, hr_h, hr_w]
    std::vector<double> hr_target;  // [1, hr_h, hr_w]

    int lr_channels() const { return 9 + noise_channels; }
};

// Names of the predictor channels in stacking order.
const std::vector<std::string>& predictor_order();

// Assembles one sample at `time` for the given patch. Deterministic in all
// arguments; windows containing missing data are rejected.
TrainingBatch make_batch(const Store& store, const NormStats& stats, const PatchCoords& patch,
                         EpochHour time, int noise_channels, std::uint64_t noise_seed);

// True when every involved window is free of missing data (cheap pre-check
// used by the training sampler to skip unusable hours).
bool batch_window_clean(const Store& store, const PatchCoords& patch, EpochHour time);

}  // namespace dsc
