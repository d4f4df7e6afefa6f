#pragma once

#include <cstdint>
#include <string>

#include "downscale/store.hpp"

namespace dsc {

// Procedural miniature store. The HR target is a deterministic function of
// the LR predictors and a synthetic orography ramp plus smooth noise, with
// distinct mapping parameters per atomic region, so that in-region models
// outperform transferred ones and enlarged training regions recover skill.
struct SynthConfig {
    double lr_resolution = 5.0;   // degrees; full LR grid 24 x 60
    double hr_resolution = 2.0;   // degrees; ratio to LR fixed at 2.5
    int n_hours = 2400;
    int start_year = 2001;
    double tp_scale = 1.0;        // mm/h scale of total precipitation
    double noise_scale = 0.25;    // mm/h scale of unresolved HR noise
    double region_contrast = 1.0; // 0 makes all regions identical
    int knot_cells = 4;           // LR cells per spatial noise knot
    int knot_hours = 6;           // hours per temporal noise knot

    static SynthConfig from_json_file(const std::string& path);
    std::string to_json() const;
};

// Per-atomic-region target mapping parameters (exposed for tests).
struct SynthRegionParams {
    double gain;        // multiplier on upsampled tp
    double oro_coef;    // orography modulation strength
    double cape_coef;   // additive convective contribution
    double noise;       // HR noise scale multiplier
};
SynthRegionParams synth_region_params(const SynthConfig& cfg, int region_index);

// Generates the full store (9 predictors, 2 statics, target) under `dir`.
// Byte-identical for equal (config, seed).
Store synth_generate(const SynthConfig& cfg, const std::string& dir, std::uint64_t seed);

}  // namespace dsc
