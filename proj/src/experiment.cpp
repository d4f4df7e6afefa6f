#include "downscale/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "downscale/baseline.hpp"
#include "downscale/crps.hpp"
#include "downscale/ensemble.hpp"
#include "downscale/error.hpp"
#include "downscale/rng.hpp"

namespace dsc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t id_hash(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<std::string> atomic_ids() {
    std::vector<std::string> out;
    for (const auto& r : partition()) out.push_back(r.id);
    return out;
}

}  // namespace

ExperimentPlan ExperimentPlan::from_json(const std::string& text) {
    json j = json::parse(text);
    ExperimentPlan p;
    p.train_regions = j.at("train_regions").get<std::vector<std::string>>();
    if (j.contains("eval_regions")) {
        p.eval_regions = j.at("eval_regions").get<std::vector<std::string>>();
    } else {
        p.eval_regions = atomic_ids();
    }
    if (j.contains("split")) {
        const auto& s = j.at("split");
        const std::string mode = s.value("mode", "proportional");
        if (mode == "years") {
            p.split.mode = SplitSpec::Mode::years;
            auto get2 = [&](const char* key, int* dst) {
                const auto arr = s.at(key).get<std::vector<int>>();
                require(arr.size() == 2, std::string("plan: split.") + key + " must be [first,last]");
                dst[0] = arr[0];
                dst[1] = arr[1];
            };
            get2("train", p.split.train_years);
            get2("val", p.split.val_years);
            get2("test", p.split.test_years);
        } else {
            require(mode == "proportional", "plan: unknown split mode " + mode);
            p.split.mode = SplitSpec::Mode::proportional;
            if (s.contains("fractions")) {
                const auto f = s.at("fractions").get<std::vector<double>>();
                require(f.size() == 3, "plan: split.fractions must have 3 entries");
                std::copy(f.begin(), f.end(), p.split.fractions);
            }
        }
    }
    if (j.contains("ablation")) {
        p.train_geo = j.at("ablation").value("train_geo", true);
        p.infer_geo = j.at("ablation").value("infer_geo", p.train_geo);
    }
    p.members = j.value("members", 8);
    p.seed = j.value("seed", std::uint64_t{1});
    p.score_stride = j.value("score_stride", 1);
    p.stats_scope = j.value("stats_scope", std::string("train_region")) == "full_domain"
                        ? StatsScope::full_domain
                        : StatsScope::train_region;
    if (j.contains("setup")) p.setup = TrainSetup::from_json(j.at("setup").dump());
    p.validate();
    return p;
}

ExperimentPlan ExperimentPlan::from_json_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "plan: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

std::string ExperimentPlan::to_json() const {
    json j;
    j["train_regions"] = train_regions;
    j["eval_regions"] = eval_regions;
    if (split.mode == SplitSpec::Mode::years) {
        j["split"] = {{"mode", "years"},
                      {"train", {split.train_years[0], split.train_years[1]}},
                      {"val", {split.val_years[0], split.val_years[1]}},
                      {"test", {split.test_years[0], split.test_years[1]}}};
    } else {
        j["split"] = {{"mode", "proportional"},
                      {"fractions", {split.fractions[0], split.fractions[1], split.fractions[2]}}};
    }
    j["ablation"] = {{"train_geo", train_geo}, {"infer_geo", infer_geo}};
    j["members"] = members;
    j["seed"] = seed;
    j["score_stride"] = score_stride;
    j["stats_scope"] = stats_scope == StatsScope::full_domain ? "full_domain" : "train_region";
    j["setup"] = json::parse(setup.to_json());
    return j.dump(2) + "\n";
}

void ExperimentPlan::validate() const {
    require(!train_regions.empty(), "plan: no training regions");
    for (const auto& id : train_regions) region_by_id(id);
    require(!eval_regions.empty(), "plan: no evaluation regions");
    for (const auto& id : eval_regions) {
        require(region_by_id(id).atomic(), "plan: evaluation regions must be atomic: " + id);
    }
    // Table 1 only evaluates matched settings.
    require(train_geo == infer_geo, "plan: infer_geo must equal train_geo");
    require(members >= 1, "plan: members must be >= 1");
    require(score_stride >= 1, "plan: score_stride must be >= 1");
}

SplitRanges temporal_split(const ExperimentPlan& plan, const Store& store) {
    const HourRange cov = store.manifest().coverage("target_precip");
    require(!cov.empty(), "split: store has no target data");
    SplitRanges out;
    if (plan.split.mode == SplitSpec::Mode::years) {
        out.train = year_range(plan.split.train_years[0], plan.split.train_years[1]);
        out.val = year_range(plan.split.val_years[0], plan.split.val_years[1]);
        out.test = year_range(plan.split.test_years[0], plan.split.test_years[1]);
        require(out.val.begin == out.train.end && out.test.begin == out.val.end,
                "split: year ranges must be contiguous");
    } else {
        const double f0 = plan.split.fractions[0];
        const double f1 = plan.split.fractions[1];
        const double f2 = plan.split.fractions[2];
        require(std::abs(f0 + f1 + f2 - 1.0) < 1e-9, "split: fractions must sum to 1");
        const std::int64_t n = cov.count();
        const EpochHour a = cov.begin + static_cast<EpochHour>(std::llround(n * f0));
        const EpochHour b = a + static_cast<EpochHour>(std::llround(n * f1));
        out.train = {cov.begin, a};
        out.val = {a, b};
        out.test = {b, cov.end};
    }
    require(cov.begin <= out.train.begin && cov.end >= out.test.end,
            "split: store coverage gap (have " + format_hour(cov.begin) + ".." +
                format_hour(cov.end) + ")");
    require(!out.train.empty() && !out.val.empty() && !out.test.empty(),
            "split: empty split range");
    return out;
}

bool TransferMatrix::complete() const {
    return cells.size() == train_regions.size() * eval_regions.size();
}

const CellResult* TransferMatrix::cell(const std::string& train, const std::string& eval) const {
    auto it = cells.find({train, eval});
    return it == cells.end() ? nullptr : &it->second;
}

std::optional<double> TransferMatrix::direct_crps(const std::string& eval) const {
    const CellResult* c = cell(eval, eval);
    if (!c || c->failed || !std::isfinite(c->crps)) return std::nullopt;
    return c->crps;
}

namespace {

struct Journal {
    std::string path;
    std::map<std::tuple<std::string, std::string, std::string>, CellResult> cells;
    std::map<std::string, double> baselines;  // eval region -> baseline CRPS

    static Journal load(const std::string& out_dir) {
        Journal j;
        j.path = out_dir + "/journal.jsonl";
        std::ifstream in(j.path);
        if (!in.good()) return j;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json e = json::parse(line);
            const std::string kind = e.value("kind", "cell");
            if (kind == "baseline") {
                j.baselines[e.at("eval").get<std::string>()] = e.at("crps").get<double>();
                continue;
            }
            CellResult c;
            c.train_region = e.at("train").get<std::string>();
            c.eval_region = e.at("eval").get<std::string>();
            c.variant = e.at("variant").get<std::string>();
            c.crps = e.at("crps").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                            : e.at("crps").get<double>();
            c.baseline_crps = e.at("baseline").get<double>();
            c.failed = e.at("failed").get<bool>();
            c.cause = e.value("cause", "");
            j.cells[{c.train_region, c.eval_region, c.variant}] = c;
        }
        return j;
    }

    void append_cell(const CellResult& c) {
        json e;
        e["kind"] = "cell";
        e["train"] = c.train_region;
        e["eval"] = c.eval_region;
        e["variant"] = c.variant;
        if (std::isfinite(c.crps)) e["crps"] = c.crps; else e["crps"] = nullptr;
        e["baseline"] = c.baseline_crps;
        e["failed"] = c.failed;
        if (!c.cause.empty()) e["cause"] = c.cause;
        write_line(e);
        cells[{c.train_region, c.eval_region, c.variant}] = c;
    }

    void append_baseline(const std::string& eval, double crps) {
        json e;
        e["kind"] = "baseline";
        e["eval"] = eval;
        e["crps"] = crps;
        write_line(e);
        baselines[eval] = crps;
    }

    void write_line(const json& e) {
        std::ofstream out(path, std::ios::app);
        require(out.good(), "journal: cannot append to " + path);
        out << e.dump() << "\n";
        require(out.good(), "journal: short write");
    }
};

TrainSetup setup_for_variant(const ExperimentPlan& plan, bool geo) {
    TrainSetup s = plan.setup;
    s.gen.use_static_inputs = geo;
    s.critic.use_static_inputs = geo;
    return s;
}

NormStats stats_for_region(const ExperimentPlan& plan, const Store& store, const Region& region,
                           const HourRange& train_hours, const std::string& out_dir) {
    fs::create_directories(out_dir + "/stats");
    const std::string cache = out_dir + "/stats/" + region.id + "_" +
                              (plan.stats_scope == StatsScope::full_domain ? "full" : "region") +
                              ".json";
    if (fs::exists(cache)) {
        std::ifstream in(cache);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return NormStats::from_json(text);
    }
    NormStats stats = compute_stats(store, region, train_hours, plan.stats_scope);
    std::ofstream out(cache, std::ios::trunc);
    out << stats.to_json();
    return stats;
}

double baseline_cell_crps(const Store& store, const std::string& eval_region,
                          const HourRange& test_hours, int stride) {
    const IndexBox hr_box = slice_one(store.hr_grid(), eval_region);
    const ScoreGrid sg = score_region(store, eval_region, hr_box, test_hours, stride,
                                      [&](EpochHour t) {
                                          return std::vector<std::vector<double>>{
                                              baseline_hour(store, t, hr_box)};
                                      });
    return aggregate(sg);
}

struct TrainedModel {
    Generator gen;
    NormStats stats;
};

// Trains the region model or loads the cached checkpoint with the matching
// config hash. Throws on training abort.
TrainedModel obtain_model(const ExperimentPlan& plan, const Store& store, const Region& region,
                          bool geo, const SplitRanges& split, const std::string& out_dir) {
    const std::string variant = geo ? "geo" : "nogeo";
    TrainSetup setup = setup_for_variant(plan, geo);
    setup.train.seed = mix_seed(plan.seed, id_hash(region.id), geo ? 1 : 0);

    NormStats stats = stats_for_region(plan, store, region, split.train, out_dir);
    const std::string ckpt_dir = out_dir + "/ckpt/" + region.id + "_" + variant;
    const std::string best = ckpt_dir + "/ckpt_best.bin";
    if (fs::exists(best)) {
        Checkpoint ck = load_checkpoint(best);
        if (ck.setup.config_hash() == setup.config_hash()) {
            return {generator_from_checkpoint(ck), std::move(stats)};
        }
    }
    const TrainResult res =
        train_model(store, region, stats, setup, split.train, split.val, ckpt_dir);
    if (res.aborted) throw Error("training aborted: " + res.abort_reason);
    Checkpoint ck = load_checkpoint(res.best_file);
    return {generator_from_checkpoint(ck), std::move(stats)};
}

MatrixRunResult run_variants(const ExperimentPlan& plan, const Store& store,
                             const std::string& out_dir, const std::vector<bool>& geo_variants,
                             int max_cells) {
    plan.validate();
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/maps");
    Journal journal = Journal::load(out_dir);
    const SplitRanges split = temporal_split(plan, store);

    MatrixRunResult result;
    int computed = 0;
    const auto budget_left = [&]() { return max_cells <= 0 || computed < max_cells; };

    // Baseline column, shared by all variants.
    for (const auto& eval : plan.eval_regions) {
        if (journal.baselines.count(eval)) continue;
        journal.append_baseline(
            eval, baseline_cell_crps(store, eval, split.test, plan.score_stride));
    }

    for (bool geo : geo_variants) {
        const std::string variant = geo ? "geo" : "nogeo";
        TransferMatrix matrix;
        matrix.train_regions = plan.train_regions;
        matrix.eval_regions = plan.eval_regions;
        matrix.variant = variant;

        for (const auto& train_id : plan.train_regions) {
            const Region& region = region_by_id(train_id);

            // Journal replay first; train only when cells remain.
            bool row_done = true;
            for (const auto& eval : plan.eval_regions) {
                auto it = journal.cells.find({train_id, eval, variant});
                if (it != journal.cells.end()) {
                    matrix.cells[{train_id, eval}] = it->second;
                } else {
                    row_done = false;
                }
            }
            if (row_done) continue;
            if (!budget_left()) {
                result.complete = false;
                continue;
            }

            std::optional<TrainedModel> model;
            std::string train_failure;
            try {
                model.emplace(obtain_model(plan, store, region, geo, split, out_dir));
            } catch (const std::exception& e) {
                train_failure = e.what();
            }

            for (const auto& eval : plan.eval_regions) {
                auto it = journal.cells.find({train_id, eval, variant});
                if (it != journal.cells.end()) {
                    matrix.cells[{train_id, eval}] = it->second;
                    continue;
                }
                if (!budget_left()) {
                    result.complete = false;
                    continue;
                }
                CellResult cell;
                cell.train_region = train_id;
                cell.eval_region = eval;
                cell.variant = variant;
                cell.baseline_crps = journal.baselines.at(eval);
                if (!model) {
                    cell.failed = true;
                    cell.cause = train_failure;
                    cell.crps = std::numeric_limits<double>::quiet_NaN();
                } else {
                    try {
                        const IndexBox hr_box = slice_one(store.hr_grid(), eval);
                        const IndexBox lr_box =
                            lr_box_for(store.lr_grid(), store.hr_grid(), hr_box);
                        const std::uint64_t cell_seed =
                            mix_seed(plan.seed, id_hash(train_id), id_hash(eval), geo ? 1 : 0);
                        const ScoreGrid sg = score_region(
                            store, eval, hr_box, split.test, plan.score_stride,
                            [&](EpochHour t) {
                                return sample_ensemble(
                                           model->gen, model->stats, store, lr_box, hr_box, t,
                                           plan.members,
                                           mix_seed(cell_seed, static_cast<std::uint64_t>(t)))
                                    .members;
                            });
                        cell.crps = aggregate(sg);
                        write_score_grid(sg, out_dir + "/maps/" + train_id + "_" + eval + "_" +
                                                 variant);
                        // Failure rule: non-finite or an order of magnitude
                        // worse than the baseline.
                        if (!std::isfinite(cell.crps)) {
                            cell.failed = true;
                            cell.cause = "non-finite score";
                        } else if (cell.crps > 10.0 * cell.baseline_crps) {
                            cell.failed = true;
                            cell.cause = "CRPS exceeds 10x baseline";
                        }
                    } catch (const std::exception& e) {
                        cell.failed = true;
                        cell.cause = e.what();
                        cell.crps = std::numeric_limits<double>::quiet_NaN();
                    }
                }
                journal.append_cell(cell);
                matrix.cells[{train_id, eval}] = cell;
                ++computed;
            }
        }

        for (const auto& [key, cell] : matrix.cells) {
            if (cell.failed) result.any_failed = true;
        }
        result.matrices.push_back(std::move(matrix));
    }
    return result;
}

}  // namespace

MatrixRunResult run_matrix(const ExperimentPlan& plan, const Store& store,
                           const std::string& out_dir, int max_cells) {
    return run_variants(plan, store, out_dir, {plan.train_geo}, max_cells);
}

MatrixRunResult run_ablation(const ExperimentPlan& plan, const Store& store,
                             const std::string& out_dir, int max_cells) {
    return run_variants(plan, store, out_dir, {true, false}, max_cells);
}

std::vector<TransferMatrix> load_matrices(const std::string& out_dir) {
    Journal journal = Journal::load(out_dir);
    std::map<std::string, TransferMatrix> by_variant;
    for (const auto& [key, cell] : journal.cells) {
        TransferMatrix& m = by_variant[cell.variant];
        m.variant = cell.variant;
        if (std::find(m.train_regions.begin(), m.train_regions.end(), cell.train_region) ==
            m.train_regions.end()) {
            m.train_regions.push_back(cell.train_region);
        }
        if (std::find(m.eval_regions.begin(), m.eval_regions.end(), cell.eval_region) ==
            m.eval_regions.end()) {
            m.eval_regions.push_back(cell.eval_region);
        }
        m.cells[{cell.train_region, cell.eval_region}] = cell;
    }
    std::vector<TransferMatrix> out;
    for (auto& [variant, m] : by_variant) {
        std::sort(m.train_regions.begin(), m.train_regions.end());
        std::sort(m.eval_regions.begin(), m.eval_regions.end());
        out.push_back(std::move(m));
    }
    return out;
}

ScoreGrid read_score_grid(const std::string& path_prefix) {
    const auto read_one = [](const std::string& path, std::uint16_t expect_code, GridSpec* grid,
                             std::vector<float>* values) {
        std::ifstream in(path, std::ios::binary);
        require(in.good(), "score grid: cannot open " + path);
        char header[64];
        in.read(header, 64);
        require(in.good(), "score grid: truncated header in " + path);
        require(std::memcmp(header, "DSC1", 4) == 0, "score grid: bad magic in " + path);
        std::uint16_t code;
        std::memcpy(&code, header + 6, 2);
        require(code == expect_code, "score grid: unexpected variable code in " + path);
        double bounds[5];
        std::memcpy(bounds, header + 8, 40);
        std::uint32_t n_steps;
        std::memcpy(&n_steps, header + 48, 4);
        require(n_steps == 1, "score grid: expected single-step chunk in " + path);
        *grid = GridSpec(bounds[0], bounds[1], bounds[2], bounds[3], bounds[4]);
        values->resize(static_cast<std::size_t>(grid->cell_count()));
        in.read(reinterpret_cast<char*>(values->data()),
                static_cast<std::streamsize>(values->size() * 4));
        require(in.gcount() == static_cast<std::streamsize>(values->size() * 4),
                "score grid: truncated payload in " + path);
    };

    ScoreGrid out;
    std::vector<float> crps, hours;
    read_one(path_prefix + "_crps.bin", kScoreCrpsCode, &out.grid, &crps);
    GridSpec hours_grid;
    read_one(path_prefix + "_hours.bin", kScoreHoursCode, &hours_grid, &hours);
    require(hours_grid == out.grid, "score grid: crps/hours grids disagree");
    out.mean_crps.assign(crps.begin(), crps.end());
    out.hours_counted.resize(hours.size());
    for (std::size_t k = 0; k < hours.size(); ++k) {
        out.hours_counted[k] = static_cast<std::int64_t>(hours[k]);
    }
    return out;
}

}  // namespace dsc
