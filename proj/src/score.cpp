#include "downscale/score.hpp"

#include <cmath>
#include <cstdio>

#include "downscale/crps.hpp"
#include "downscale/error.hpp"

namespace dsc {

ScoreAccumulator::ScoreAccumulator(std::string region_id, const GridSpec& grid)
    : region_id_(std::move(region_id)), grid_(grid),
      crps_sum_(static_cast<std::size_t>(grid.cell_count()), 0.0),
      hours_(static_cast<std::size_t>(grid.cell_count()), 0) {}

void ScoreAccumulator::add_hour(const std::vector<std::vector<double>>& members,
                                const std::vector<float>& obs,
                                const std::vector<std::uint8_t>& obs_missing) {
    require(!members.empty(), "score: empty ensemble");
    const std::size_t n = crps_sum_.size();
    require(obs.size() == n, "score: observation shape mismatch");
    require(obs_missing.empty() || obs_missing.size() == n, "score: mask shape mismatch");
    for (const auto& m : members) {
        require(m.size() == n, "score: member shape mismatch");
    }

    std::vector<double> sample(members.size());
    for (std::size_t k = 0; k < n; ++k) {
        if (!obs_missing.empty() && obs_missing[k]) continue;
        for (std::size_t i = 0; i < members.size(); ++i) sample[i] = members[i][k];
        crps_sum_[k] += crps_empirical(sample, obs[k]);
        ++hours_[k];
    }
}

ScoreGrid ScoreAccumulator::finalize() const {
    ScoreGrid out;
    out.region_id = region_id_;
    out.grid = grid_;
    out.mean_crps.resize(crps_sum_.size(), 0.0);
    out.hours_counted = hours_;
    for (std::size_t k = 0; k < crps_sum_.size(); ++k) {
        out.mean_crps[k] = hours_[k] > 0 ? crps_sum_[k] / static_cast<double>(hours_[k]) : 0.0;
    }
    return out;
}

ScoreGrid score_region(const Store& obs_store, const std::string& region_id,
                       const IndexBox& hr_box, const HourRange& hours, int hour_stride,
                       const EnsembleSupplier& supplier) {
    require(hour_stride > 0, "score: hour stride must be positive");
    require(!hours.empty(), "score: empty hour range");
    const GridSpec& hr = obs_store.hr_grid();
    GridSpec win(hr.lat_min + hr_box.lat_begin * hr.resolution,
                 hr.lat_min + hr_box.lat_end * hr.resolution,
                 hr.lon_min + hr_box.lon_begin * hr.resolution,
                 hr.lon_min + hr_box.lon_end * hr.resolution, hr.resolution);
    ScoreAccumulator acc(region_id, win);
    for (EpochHour t = hours.begin; t < hours.end; t += hour_stride) {
        const FieldChunk obs = obs_store.read_window("target_precip", t, 1, hr_box);
        acc.add_hour(supplier(t), obs.values, obs.missing);
    }
    return acc.finalize();
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

double aggregate(const ScoreGrid& grid, bool area_weighted) {
    std::vector<double> vals;
    std::vector<double> weights;
    vals.reserve(grid.mean_crps.size());
    for (int i = 0; i < grid.grid.n_lat; ++i) {
        const double w = area_weighted
                             ? std::cos(grid.grid.lat_center(i) * M_PI / 180.0)
                             : 1.0;
        for (int j = 0; j < grid.grid.n_lon; ++j) {
            const std::size_t k = static_cast<std::size_t>(i) * grid.grid.n_lon + j;
            if (grid.hours_counted[k] <= 0) continue;
            vals.push_back(grid.mean_crps[k] * w);
            weights.push_back(w);
        }
    }
    require(!vals.empty(), "aggregate: score grid has no scored pixels");
    return pairwise_sum(vals) / pairwise_sum(weights);
}

void write_score_grid(const ScoreGrid& grid, const std::string& path_prefix) {
    std::vector<float> crps(grid.mean_crps.begin(), grid.mean_crps.end());
    write_chunk_file(path_prefix + "_crps.bin", kScoreCrpsCode, grid.grid, 0, crps);
    std::vector<float> hours(grid.hours_counted.size());
    for (std::size_t k = 0; k < hours.size(); ++k) {
        hours[k] = static_cast<float>(grid.hours_counted[k]);
    }
    write_chunk_file(path_prefix + "_hours.bin", kScoreHoursCode, grid.grid, 0, hours);
}

std::string score_csv_header() {
    return "train_region,eval_region,crps,baseline_crps,improvement,direct_crps,drop\n";
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

std::string score_csv_row(const RegionalScore& s) {
    std::string row = s.train_region + "," + s.eval_region + "," + fmt(s.crps) + "," +
                      fmt(s.baseline_crps) + "," +
                      fmt(s.baseline_crps > 0.0 ? 1.0 - s.crps / s.baseline_crps : 0.0) + ",";
    if (s.direct_crps) {
        row += fmt(*s.direct_crps) + ",";
        row += fmt(*s.direct_crps > 0.0 ? s.crps / *s.direct_crps - 1.0 : 0.0);
    } else {
        row += ",";
    }
    return row + "\n";
}

}  // namespace dsc
