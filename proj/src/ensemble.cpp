#include "downscale/ensemble.hpp"

#include <cmath>

#include "downscale/error.hpp"
#include "downscale/rng.hpp"

namespace dsc {

IndexBox lr_box_for(const GridSpec& lr_grid, const GridSpec& hr_grid, const IndexBox& hr_box) {
    const auto to_lr = [&](double value, double origin) {
        const double f = (value - origin) / lr_grid.resolution;
        require(std::abs(f - std::round(f)) <= 1e-9,
                "ensemble: HR window does not align with LR cell edges");
        return static_cast<int>(std::llround(f));
    };
    IndexBox lr;
    lr.lat_begin = to_lr(hr_grid.lat_min + hr_box.lat_begin * hr_grid.resolution, lr_grid.lat_min);
    lr.lat_end = to_lr(hr_grid.lat_min + hr_box.lat_end * hr_grid.resolution, lr_grid.lat_min);
    lr.lon_begin = to_lr(hr_grid.lon_min + hr_box.lon_begin * hr_grid.resolution, lr_grid.lon_min);
    lr.lon_end = to_lr(hr_grid.lon_min + hr_box.lon_end * hr_grid.resolution, lr_grid.lon_min);
    return lr;
}

EnsembleForecast sample_ensemble(const Generator& gen, const NormStats& stats,
                                 const Store& store, const IndexBox& lr_box,
                                 const IndexBox& hr_box, EpochHour time, int members,
                                 std::uint64_t seed) {
    require(members >= 1, "ensemble: need at least one member");
    const GeneratorConfig& cfg = gen.config();

    const int h = lr_box.n_lat(), w = lr_box.n_lon();
    const int hh = hr_box.n_lat(), hw = hr_box.n_lon();
    require(hh * 2 == h * 5 && hw * 2 == w * 5, "ensemble: windows are not in 2.5x ratio");
    const std::size_t lr_plane = static_cast<std::size_t>(h) * w;
    const std::size_t hr_plane = static_cast<std::size_t>(hh) * hw;

    // Shared conditioning, replicated across the member batch.
    std::vector<double> pred;
    pred.reserve(9 * lr_plane);
    for (const auto& name : predictor_order()) {
        const FieldChunk win = store.read_window(name, time, 1, lr_box);
        require(win.missing.empty(), "ensemble: missing predictor data at " + format_hour(time));
        std::vector<double> plane(win.values.begin(), win.values.end());
        normalize_span(plane, stats.for_variable(name));
        pred.insert(pred.end(), plane.begin(), plane.end());
    }

    const int c_in = 9 + cfg.noise_channels;
    Tensor lr_in({members, c_in, h, w});
    for (int m = 0; m < members; ++m) {
        std::copy(pred.begin(), pred.end(),
                  lr_in.data.begin() + static_cast<std::size_t>(m) * c_in * lr_plane);
        SplitMix64 rng(mix_seed(seed, 0x6d656d62 /*"memb"*/, static_cast<std::uint64_t>(m)));
        double* noise =
            lr_in.data.data() + (static_cast<std::size_t>(m) * c_in + 9) * lr_plane;
        for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.noise_channels) * lr_plane; ++k) {
            noise[k] = rng.normal();
        }
    }

    ad::Var statics;
    {
        Tensor st({members, 2, hh, hw});
        const FieldChunk lsm = store.read_static("lsm", hr_box);
        const FieldChunk orog = store.read_static("orog", hr_box);
        std::vector<double> lsm_v(lsm.values.begin(), lsm.values.end());
        normalize_span(lsm_v, stats.for_variable("lsm"));
        std::vector<double> orog_v(orog.values.begin(), orog.values.end());
        normalize_span(orog_v, stats.for_variable("orog"));
        for (int m = 0; m < members; ++m) {
            std::copy(lsm_v.begin(), lsm_v.end(),
                      st.data.begin() + static_cast<std::size_t>(m) * 2 * hr_plane);
            std::copy(orog_v.begin(), orog_v.end(),
                      st.data.begin() + (static_cast<std::size_t>(m) * 2 + 1) * hr_plane);
        }
        statics = ad::Var::constant(std::move(st));
    }

    const Generator frozen = detached_copy(gen);
    const ad::Var out = frozen.forward(ad::Var::constant(std::move(lr_in)), statics);

    EnsembleForecast fc;
    const GridSpec& hr = store.hr_grid();
    fc.grid = GridSpec(hr.lat_min + hr_box.lat_begin * hr.resolution,
                       hr.lat_min + hr_box.lat_end * hr.resolution,
                       hr.lon_min + hr_box.lon_begin * hr.resolution,
                       hr.lon_min + hr_box.lon_end * hr.resolution, hr.resolution);
    fc.time = time;
    fc.members.resize(members);
    const VarStats& tstats = stats.for_variable("target_precip");
    for (int m = 0; m < members; ++m) {
        fc.members[m].resize(hr_plane);
        const double* src = out.val().data.data() + static_cast<std::size_t>(m) * hr_plane;
        for (std::size_t k = 0; k < hr_plane; ++k) {
            fc.members[m][k] = denormalize_value(src[k], tstats);  // mm/h, clamped >= 0
        }
    }
    return fc;
}

}  // namespace dsc
