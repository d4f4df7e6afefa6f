#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "downscale/score.hpp"
#include "downscale/store.hpp"
#include "downscale/train.hpp"

namespace dsc {

struct SplitSpec {
    enum class Mode { years, proportional } mode = Mode::proportional;
    int train_years[2] = {2001, 2018};
    int val_years[2] = {2019, 2020};
    int test_years[2] = {2021, 2022};
    double fractions[3] = {0.8, 0.1, 0.1};
};

struct SplitRanges {
    HourRange train, val, test;
};

struct ExperimentPlan {
    std::vector<std::string> train_regions;
    std::vector<std::string> eval_regions;  // defaults to the 9 atomic regions
    SplitSpec split;
    bool train_geo = true;
    bool infer_geo = true;  // must equal train_geo
    int members = 8;
    std::uint64_t seed = 1;
    int score_stride = 1;      // hours between scored test timestamps
    StatsScope stats_scope = StatsScope::train_region;
    TrainSetup setup;

    static ExperimentPlan from_json_file(const std::string& path);
    static ExperimentPlan from_json(const std::string& text);
    std::string to_json() const;
    void validate() const;
};

// Disjoint, exhaustive train/val/test hour ranges over the stored span
// (configured years, or proportional splits for synthetic stores).
SplitRanges temporal_split(const ExperimentPlan& plan, const Store& store);

struct CellResult {
    std::string train_region;
    std::string eval_region;
    std::string variant;  // "geo" or "nogeo"
    double crps = 0.0;
    double baseline_crps = 0.0;
    bool failed = false;
    std::string cause;
};

struct TransferMatrix {
    std::vector<std::string> train_regions;
    std::vector<std::string> eval_regions;
    std::string variant;
    std::map<std::pair<std::string, std::string>, CellResult> cells;

    bool complete() const;
    const CellResult* cell(const std::string& train, const std::string& eval) const;
    std::optional<double> direct_crps(const std::string& eval) const;
};

struct MatrixRunResult {
    std::vector<TransferMatrix> matrices;  // one per variant run
    bool any_failed = false;
    bool complete = true;  // false when max_cells stopped the run early
};

// Trains (or reuses cached checkpoints for) every train region and scores all
// eval regions over the test range; resumable through the journal in
// out_dir/journal.jsonl. Cell failures (non-finite or CRPS > 10x baseline)
// are recorded and retained without aborting the run. max_cells <= 0 means
// unlimited; a positive value stops after that many newly computed cells.
MatrixRunResult run_matrix(const ExperimentPlan& plan, const Store& store,
                           const std::string& out_dir, int max_cells = 0);

// Two matched matrices differing only in the static-feature flags.
MatrixRunResult run_ablation(const ExperimentPlan& plan, const Store& store,
                             const std::string& out_dir, int max_cells = 0);

// Reconstructs matrices from the journal (used by report emission).
std::vector<TransferMatrix> load_matrices(const std::string& out_dir);

// CSV tables (raw CRPS, improvement over baseline, drop vs direct), the
// per-cell score rows, an ablation win/loss table when both variants exist,
// and per-cell log10 CRPS maps with a fixed color range.
void emit_report(const std::string& results_dir, const std::string& report_dir);

// Reads back a score grid written next to the journal during a run.
ScoreGrid read_score_grid(const std::string& path_prefix);

}  // namespace dsc
