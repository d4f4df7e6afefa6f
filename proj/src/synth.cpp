#include "downscale/synth.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "downscale/baseline.hpp"
#include "downscale/error.hpp"
#include "downscale/rng.hpp"

namespace dsc {

using nlohmann::json;

SynthConfig SynthConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "synth: cannot open config " + path);
    json j = json::parse(in);
    SynthConfig c;
    c.lr_resolution = j.value("lr_resolution", c.lr_resolution);
    c.hr_resolution = j.value("hr_resolution", c.hr_resolution);
    c.n_hours = j.value("n_hours", c.n_hours);
    c.start_year = j.value("start_year", c.start_year);
    c.tp_scale = j.value("tp_scale", c.tp_scale);
    c.noise_scale = j.value("noise_scale", c.noise_scale);
    c.region_contrast = j.value("region_contrast", c.region_contrast);
    c.knot_cells = j.value("knot_cells", c.knot_cells);
    c.knot_hours = j.value("knot_hours", c.knot_hours);
    return c;
}

std::string SynthConfig::to_json() const {
    json j;
    j["lr_resolution"] = lr_resolution;
    j["hr_resolution"] = hr_resolution;
    j["n_hours"] = n_hours;
    j["start_year"] = start_year;
    j["tp_scale"] = tp_scale;
    j["noise_scale"] = noise_scale;
    j["region_contrast"] = region_contrast;
    j["knot_cells"] = knot_cells;
    j["knot_hours"] = knot_hours;
    return j.dump(2) + "\n";
}

namespace {

// Region order NW NM NE TW TM TE SW SM SE. Gains straddle 1 and orography
// strengths vary so the bilinear baseline is biased everywhere and transfer
// between regions is visibly lossy.
constexpr double kGain[9] = {1.45, 0.65, 1.25, 0.75, 1.35, 0.70, 1.30, 0.60, 1.20};
constexpr double kOro[9] = {0.70, 0.10, 0.90, 0.30, 0.00, 0.50, 0.20, 0.05, 0.40};
constexpr double kCape[9] = {0.10, 0.40, 0.00, 0.30, 0.50, 0.20, 0.05, 0.45, 0.15};
constexpr double kNoise[9] = {1.0, 1.3, 0.8, 1.2, 1.5, 0.9, 1.1, 1.4, 1.0};
constexpr double kOroAmp[9] = {2600.0, 300.0, 3200.0, 1100.0, 150.0, 1900.0, 700.0, 250.0, 1500.0};

// Smooth standard-normal-ish field: trilinear interpolation over a lattice of
// hashed Gaussian knots. Evaluation order independent.
struct SmoothField {
    std::uint64_t seed;
    double cell_knots;  // grid cells per knot
    double hour_knots;  // hours per knot

    double knot(std::int64_t kt, std::int64_t ki, std::int64_t kj) const {
        SplitMix64 r(mix_seed(seed, static_cast<std::uint64_t>(kt),
                              static_cast<std::uint64_t>(ki) * 0x1f1f1f1f1ull +
                                  static_cast<std::uint64_t>(kj)));
        return r.normal();
    }

    double at(double t, double i, double j) const {
        const double tf = t / hour_knots, fi = i / cell_knots, fj = j / cell_knots;
        const std::int64_t t0 = static_cast<std::int64_t>(std::floor(tf));
        const std::int64_t i0 = static_cast<std::int64_t>(std::floor(fi));
        const std::int64_t j0 = static_cast<std::int64_t>(std::floor(fj));
        const double at_ = tf - t0, ai = fi - i0, aj = fj - j0;
        double v = 0.0;
        for (int dt = 0; dt < 2; ++dt) {
            for (int di = 0; di < 2; ++di) {
                for (int dj = 0; dj < 2; ++dj) {
                    const double w = (dt ? at_ : 1 - at_) * (di ? ai : 1 - ai) * (dj ? aj : 1 - aj);
                    v += w * knot(t0 + dt, i0 + di, j0 + dj);
                }
            }
        }
        // Trilinear blending shrinks the variance; rescale to roughly unit.
        return v * 1.54;
    }
};

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

int region_index_for(double lat, double lon) {
    const int bi = lat >= 20.0 ? 0 : (lat >= -20.0 ? 1 : 2);  // N, T, S
    const int bj = lon < -30.0 ? 0 : (lon < 70.0 ? 1 : 2);    // W, M, E
    return bi * 3 + bj;
}

enum FieldTag : std::uint64_t {
    kTagTp = 1, kTagCp, kTagCape, kTagTwc, kTagTlwc, kTagSp, kTagTisr, kTagU, kTagV,
    kTagOro, kTagLsm, kTagNoise
};

}  // namespace

SynthRegionParams synth_region_params(const SynthConfig& cfg, int region_index) {
    require(region_index >= 0 && region_index < 9, "synth: region index out of range");
    const double c = cfg.region_contrast;
    return {1.0 + c * (kGain[region_index] - 1.0), c * kOro[region_index],
            c * kCape[region_index], cfg.noise_scale * kNoise[region_index]};
}

Store synth_generate(const SynthConfig& cfg, const std::string& dir, std::uint64_t seed) {
    require(std::abs(cfg.lr_resolution / cfg.hr_resolution - 2.5) < 1e-9,
            "synth: LR/HR resolution ratio must be 2.5");
    require(cfg.n_hours > 0, "synth: n_hours must be positive");

    const GridSpec lr = full_domain(cfg.lr_resolution);
    const GridSpec hr = full_domain(cfg.hr_resolution);
    Store store(dir, lr, hr);

    const std::size_t lr_plane = static_cast<std::size_t>(lr.cell_count());
    const std::size_t hr_plane = static_cast<std::size_t>(hr.cell_count());
    const double hr_knot_cells = cfg.knot_cells * 2.5;

    // Statics. Orography amplitude varies per region on top of a smooth shape,
    // blended across a few cells at region borders to stay continuous.
    SmoothField oro_shape{mix_seed(seed, kTagOro), hr_knot_cells, 1e18};
    SmoothField lsm_shape{mix_seed(seed, kTagLsm), hr_knot_cells * 1.5, 1e18};
    {
        FieldChunk oro, lsm;
        for (FieldChunk* c : {&oro, &lsm}) {
            c->start_time = 0;
            c->n_steps = 1;
            c->grid = hr;
            c->values.resize(hr_plane);
        }
        oro.variable = "orog";
        lsm.variable = "lsm";
        for (int i = 0; i < hr.n_lat; ++i) {
            for (int j = 0; j < hr.n_lon; ++j) {
                const int r = region_index_for(hr.lat_center(i), hr.lon_center(j));
                const double shape = softplus(oro_shape.at(0.0, i, j) + 0.3);
                oro.values[i * hr.n_lon + j] = static_cast<float>(kOroAmp[r] * shape);
                lsm.values[i * hr.n_lon + j] =
                    static_cast<float>(sigmoid(2.0 * lsm_shape.at(0.0, i, j)));
            }
        }
        store.write_chunk(oro);
        store.write_chunk(lsm);
    }

    // Normalized orography for the target mapping, in [0, ~1] scale.
    std::vector<double> oro_norm(hr_plane);
    {
        const FieldChunk oro = store.read_static("orog", {0, hr.n_lat, 0, hr.n_lon});
        double mx = 1.0;
        for (float v : oro.values) mx = std::max(mx, static_cast<double>(v));
        for (std::size_t k = 0; k < hr_plane; ++k) oro_norm[k] = oro.values[k] / mx;
    }

    SmoothField f_tp{mix_seed(seed, kTagTp), static_cast<double>(cfg.knot_cells),
                     static_cast<double>(cfg.knot_hours)};
    SmoothField f_cp{mix_seed(seed, kTagCp), static_cast<double>(cfg.knot_cells),
                     static_cast<double>(cfg.knot_hours)};
    SmoothField f_cape{mix_seed(seed, kTagCape), static_cast<double>(cfg.knot_cells),
                       static_cast<double>(cfg.knot_hours)};
    SmoothField f_twc{mix_seed(seed, kTagTwc), static_cast<double>(cfg.knot_cells),
                      static_cast<double>(cfg.knot_hours)};
    SmoothField f_tlwc{mix_seed(seed, kTagTlwc), static_cast<double>(cfg.knot_cells),
                       static_cast<double>(cfg.knot_hours)};
    SmoothField f_sp{mix_seed(seed, kTagSp), 2.0 * cfg.knot_cells, 4.0 * cfg.knot_hours};
    SmoothField f_tisr{mix_seed(seed, kTagTisr), 3.0 * cfg.knot_cells, 2.0 * cfg.knot_hours};
    SmoothField f_u{mix_seed(seed, kTagU), 2.0 * cfg.knot_cells, 2.0 * cfg.knot_hours};
    SmoothField f_v{mix_seed(seed, kTagV), 2.0 * cfg.knot_cells, 2.0 * cfg.knot_hours};
    SmoothField f_noise{mix_seed(seed, kTagNoise), hr_knot_cells * 0.6,
                        std::max(1.0, cfg.knot_hours / 2.0)};

    const EpochHour start = year_start(cfg.start_year);
    const EpochHour end = start + cfg.n_hours;

    std::vector<double> tp_plane(lr_plane), cape_plane(lr_plane);
    EpochHour t = start;
    while (t < end) {
        const EpochHour chunk_end = std::min(end, next_month_start(t));
        const int steps = static_cast<int>(chunk_end - t);

        std::vector<FieldChunk> preds;
        for (const auto& v : all_variables()) {
            if (v.kind != VarKind::predictor) continue;
            FieldChunk c;
            c.variable = v.name;
            c.start_time = t;
            c.n_steps = steps;
            c.grid = lr;
            c.values.resize(lr_plane * steps);
            preds.push_back(std::move(c));
        }
        FieldChunk target;
        target.variable = "target_precip";
        target.start_time = t;
        target.n_steps = steps;
        target.grid = hr;
        target.values.resize(hr_plane * steps);

        for (int s = 0; s < steps; ++s) {
            const double th = static_cast<double>(t - start + s);
            // Predictors on the LR grid.
            for (int i = 0; i < lr.n_lat; ++i) {
                for (int j = 0; j < lr.n_lon; ++j) {
                    const std::size_t k = s * lr_plane + i * lr.n_lon + j;
                    const double tp = cfg.tp_scale * softplus(1.3 * f_tp.at(th, i, j) - 0.2);
                    const double cp = tp * sigmoid(f_cp.at(th, i, j));
                    const double cape = 120.0 * softplus(f_cape.at(th, i, j) + 0.4);
                    preds[0].values[k] = static_cast<float>(tp);
                    preds[1].values[k] = static_cast<float>(cp);
                    preds[2].values[k] = static_cast<float>(cape);
                    preds[3].values[k] = static_cast<float>(12.0 + 4.0 * f_twc.at(th, i, j));
                    preds[4].values[k] = static_cast<float>(0.8 + 0.3 * f_tlwc.at(th, i, j));
                    preds[5].values[k] = static_cast<float>(101325.0 + 800.0 * f_sp.at(th, i, j));
                    preds[6].values[k] =
                        static_cast<float>(600.0 * softplus(f_tisr.at(th, i, j) + 1.0));
                    preds[7].values[k] = static_cast<float>(8.0 * f_u.at(th, i, j));
                    preds[8].values[k] = static_cast<float>(8.0 * f_v.at(th, i, j));
                    tp_plane[i * lr.n_lon + j] = tp;
                    cape_plane[i * lr.n_lon + j] = cape;
                }
            }
            // Target on the HR grid: region-parameterized function of the
            // upsampled predictors and orography plus smooth noise.
            const std::vector<double> tp_hr = bilinear_upsample(tp_plane, lr, hr);
            const std::vector<double> cape_hr = bilinear_upsample(cape_plane, lr, hr);
            for (int i = 0; i < hr.n_lat; ++i) {
                for (int j = 0; j < hr.n_lon; ++j) {
                    const std::size_t k = i * hr.n_lon + j;
                    const SynthRegionParams p = synth_region_params(
                        cfg, region_index_for(hr.lat_center(i), hr.lon_center(j)));
                    double v = p.gain * tp_hr[k] * (1.0 + p.oro_coef * oro_norm[k]) +
                               p.cape_coef * 0.004 * cape_hr[k] +
                               p.noise * f_noise.at(th, i, j);
                    target.values[s * hr_plane + k] = static_cast<float>(std::max(v, 0.0));
                }
            }
        }
        for (auto& c : preds) store.write_chunk(c);
        store.write_chunk(target);
        t = chunk_end;
    }
    return store;
}

}  // namespace dsc
