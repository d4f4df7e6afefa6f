#include "downscale/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "downscale/error.hpp"

namespace dsc {

std::vector<double> bilinear_upsample(const std::vector<double>& lr_values,
                                      const GridSpec& source, const GridSpec& target) {
    require(lr_values.size() == static_cast<std::size_t>(source.cell_count()),
            "bilinear: value count does not match source grid");
    require(target.lat_min >= source.lat_min - 1e-9 && target.lat_max <= source.lat_max + 1e-9 &&
                target.lon_min >= source.lon_min - 1e-9 && target.lon_max <= source.lon_max + 1e-9,
            "bilinear: target extent exceeds source extent");

    std::vector<double> out(static_cast<std::size_t>(target.cell_count()));

    // Precompute per-axis neighbor indices and weights in LR center space.
    const auto axis = [](int n_out, double out_min, double out_res, int n_in, double in_min,
                         double in_res, std::vector<int>& i0, std::vector<double>& w) {
        i0.resize(n_out);
        w.resize(n_out);
        for (int k = 0; k < n_out; ++k) {
            const double c = out_min + (k + 0.5) * out_res;
            double f = (c - in_min) / in_res - 0.5;        // position in center space
            f = std::clamp(f, 0.0, static_cast<double>(n_in - 1));  // edge replication
            int lo = std::min(static_cast<int>(std::floor(f)), n_in - 2);
            lo = std::max(lo, 0);
            i0[k] = lo;
            w[k] = f - lo;
        }
    };

    std::vector<int> li;
    std::vector<double> lw;
    axis(target.n_lat, target.lat_min, target.resolution, source.n_lat, source.lat_min,
         source.resolution, li, lw);
    std::vector<int> lj;
    std::vector<double> jw;
    axis(target.n_lon, target.lon_min, target.resolution, source.n_lon, source.lon_min,
         source.resolution, lj, jw);

    if (source.n_lat == 1 || source.n_lon == 1) {
        // Degenerate axes fall back to nearest along that axis.
        for (int i = 0; i < target.n_lat; ++i) {
            for (int j = 0; j < target.n_lon; ++j) {
                out[static_cast<std::size_t>(i) * target.n_lon + j] =
                    lr_values[static_cast<std::size_t>(li[i]) * source.n_lon + lj[j]];
            }
        }
        return out;
    }

    for (int i = 0; i < target.n_lat; ++i) {
        const double ti = lw[i];
        const std::size_t r0 = static_cast<std::size_t>(li[i]) * source.n_lon;
        const std::size_t r1 = r0 + source.n_lon;
        for (int j = 0; j < target.n_lon; ++j) {
            const double tj = jw[j];
            const double v00 = lr_values[r0 + lj[j]];
            const double v01 = lr_values[r0 + lj[j] + 1];
            const double v10 = lr_values[r1 + lj[j]];
            const double v11 = lr_values[r1 + lj[j] + 1];
            out[static_cast<std::size_t>(i) * target.n_lon + j] =
                (1.0 - ti) * ((1.0 - tj) * v00 + tj * v01) + ti * ((1.0 - tj) * v10 + tj * v11);
        }
    }
    return out;
}

namespace {

GridSpec window_grid(const GridSpec& g, const IndexBox& box) {
    return GridSpec(g.lat_min + box.lat_begin * g.resolution, g.lat_min + box.lat_end * g.resolution,
                    g.lon_min + box.lon_begin * g.resolution,
                    g.lon_min + box.lon_end * g.resolution, g.resolution);
}

}  // namespace

std::vector<double> baseline_hour(const Store& store, EpochHour t, const IndexBox& hr_box) {
    const GridSpec& lr = store.lr_grid();
    const GridSpec hr_win = window_grid(store.hr_grid(), hr_box);
    // Full LR field so edge cells interpolate from real neighbors.
    const FieldChunk tp = store.read_full("tp", t, 1);
    std::vector<double> lr_vals(tp.values.begin(), tp.values.end());
    return bilinear_upsample(lr_vals, lr, hr_win);
}

void baseline_forecast(const Store& store, const Region& region, const HourRange& hours,
                       const std::string& out_dir) {
    require(!hours.empty(), "baseline: empty hour range");
    const GridSpec& hr = store.hr_grid();
    for (const auto& member : region.members) {
        const IndexBox box = slice_one(hr, member);
        const GridSpec win = window_grid(hr, box);
        Store out(out_dir + "/" + member, store.lr_grid(), win);
        const std::size_t plane = static_cast<std::size_t>(win.n_lat) * win.n_lon;

        EpochHour t = hours.begin;
        while (t < hours.end) {
            const EpochHour chunk_end = std::min(hours.end, next_month_start(t));
            FieldChunk chunk;
            chunk.variable = "target_precip";
            chunk.start_time = t;
            chunk.n_steps = static_cast<int>(chunk_end - t);
            chunk.grid = win;
            chunk.values.resize(plane * chunk.n_steps);
            for (EpochHour h = t; h < chunk_end; ++h) {
                const std::vector<double> hr_vals = baseline_hour(store, h, box);
                std::transform(hr_vals.begin(), hr_vals.end(),
                               chunk.values.begin() + (h - t) * plane,
                               [](double v) { return static_cast<float>(v); });
            }
            out.write_chunk(chunk);
            t = chunk_end;
        }
    }
}

}  // namespace dsc
