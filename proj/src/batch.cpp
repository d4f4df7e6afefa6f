#include "downscale/batch.hpp"

#include <cmath>

#include "downscale/error.hpp"
#include "downscale/rng.hpp"

namespace dsc {

const std::vector<std::string>& predictor_order() {
    static const std::vector<std::string> order = [] {
        std::vector<std::string> v;
        for (const auto& var : all_variables()) {
            if (var.kind == VarKind::predictor) v.push_back(var.name);
        }
        return v;
    }();
    return order;
}

namespace {

std::vector<double> window_values(const Store& store, const std::string& variable,
                                  EpochHour time, const IndexBox& box, bool is_static) {
    const FieldChunk w = is_static ? store.read_static(variable, box)
                                   : store.read_window(variable, time, 1, box);
    require(w.missing.empty(), "batch: missing data in " + variable + " window at " +
                                   format_hour(time));
    std::vector<double> out(w.values.begin(), w.values.end());
    for (double v : out) require(std::isfinite(v), "batch: non-finite value in " + variable);
    return out;
}

}  // namespace

TrainingBatch make_batch(const Store& store, const NormStats& stats, const PatchCoords& patch,
                         EpochHour time, int noise_channels, std::uint64_t noise_seed) {
    require(noise_channels >= 0, "batch: negative noise channel count");
    TrainingBatch b;
    b.lr_h = patch.lr.n_lat();
    b.lr_w = patch.lr.n_lon();
    b.hr_h = patch.hr.n_lat();
    b.hr_w = patch.hr.n_lon();
    b.noise_channels = noise_channels;

    const std::size_t lr_plane = static_cast<std::size_t>(b.lr_h) * b.lr_w;
    const std::size_t hr_plane = static_cast<std::size_t>(b.hr_h) * b.hr_w;
    b.lr.reserve((9 + noise_channels) * lr_plane);

    for (const auto& name : predictor_order()) {
        std::vector<double> plane = window_values(store, name, time, patch.lr, false);
        normalize_span(plane, stats.for_variable(name));
        b.lr.insert(b.lr.end(), plane.begin(), plane.end());
    }
    SplitMix64 rng(mix_seed(noise_seed, 0x6e6f6973 /*"nois"*/));
    for (int c = 0; c < noise_channels; ++c) {
        for (std::size_t k = 0; k < lr_plane; ++k) b.lr.push_back(rng.normal());
    }

    std::vector<double> lsm = window_values(store, "lsm", 0, patch.hr, true);
    normalize_span(lsm, stats.for_variable("lsm"));  // identity stats
    std::vector<double> orog = window_values(store, "orog", 0, patch.hr, true);
    normalize_span(orog, stats.for_variable("orog"));
    b.hr_static.reserve(2 * hr_plane);
    b.hr_static.insert(b.hr_static.end(), lsm.begin(), lsm.end());
    b.hr_static.insert(b.hr_static.end(), orog.begin(), orog.end());

    std::vector<double> target = window_values(store, "target_precip", time, patch.hr, false);
    normalize_span(target, stats.for_variable("target_precip"));
    b.hr_target = std::move(target);
    return b;
}

bool batch_window_clean(const Store& store, const PatchCoords& patch, EpochHour time) {
    for (const auto& name : predictor_order()) {
        const FieldChunk w = store.read_window(name, time, 1, patch.lr);
        if (!w.missing.empty()) return false;
    }
    const FieldChunk t = store.read_window("target_precip", time, 1, patch.hr);
    return t.missing.empty();
}

}  // namespace dsc
