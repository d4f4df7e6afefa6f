#pragma once

#include <functional>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include "downscale/grid.hpp"
#include "downscale/store.hpp"
#include "downscale/timeutil.hpp"

namespace dsc {

// m stochastic realizations of one HR window at one hour, physical units
// (mm/h), each member a row-major [n_lat x n_lon] plane.
struct EnsembleForecast {
    GridSpec grid;
    EpochHour time = 0;
    std::vector<std::vector<double>> members;
};

// Per-pixel mean CRPS over the scored hours of one region window.
struct ScoreGrid {
    std::string region_id;
    GridSpec grid;
    std::vector<double> mean_crps;       // mm/h
    std::vector<std::int64_t> hours_counted;
};

struct RegionalScore {
    std::string train_region;
    std::string eval_region;
    double crps = 0.0;
    double baseline_crps = 0.0;
    std::optional<double> direct_crps;
};

// Streaming per-pixel scorer. Hours with missing observations are skipped per
// pixel and tracked in hours_counted; accumulation is float64.
class ScoreAccumulator {
public:
    ScoreAccumulator(std::string region_id, const GridSpec& grid);

    // members: m planes in mm/h; obs: the observed plane with optional
    // missing flags (empty = all valid).
    void add_hour(const std::vector<std::vector<double>>& members,
                  const std::vector<float>& obs, const std::vector<std::uint8_t>& obs_missing);

    ScoreGrid finalize() const;

private:
    std::string region_id_;
    GridSpec grid_;
    std::vector<double> crps_sum_;
    std::vector<std::int64_t> hours_;
};

// Scores a supplier of per-hour ensembles against stored observations over
// [hours). The supplier returns the members for one hour of the region window.
using EnsembleSupplier = std::function<std::vector<std::vector<double>>(EpochHour)>;
ScoreGrid score_region(const Store& obs_store, const std::string& region_id,
                       const IndexBox& hr_box, const HourRange& hours, int hour_stride,
                       const EnsembleSupplier& supplier);

// Unweighted mean over pixels with at least one scored hour. The optional
// latitude weighting (cos of center latitude) is off by default, matching the
// paper's pixel-wise mean.
double aggregate(const ScoreGrid& grid, bool area_weighted = false);

// Order-insensitive reduction used by aggregate; exposed for tests.
double pairwise_sum(std::span<const double> values);

// Score maps in the datastore chunk format: mean CRPS and hours counted as
// two single-step chunks with reserved variable codes.
void write_score_grid(const ScoreGrid& grid, const std::string& path_prefix);

// CSV row: train,eval,crps,baseline_crps,improvement,direct_crps,drop
std::string score_csv_header();
std::string score_csv_row(const RegionalScore& s);

}  // namespace dsc
