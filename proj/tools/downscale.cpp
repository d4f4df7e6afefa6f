#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "downscale/archive.hpp"
#include "downscale/baseline.hpp"
#include "downscale/ensemble.hpp"
#include "downscale/error.hpp"
#include "downscale/experiment.hpp"
#include "downscale/gradcheck.hpp"
#include "downscale/grid.hpp"
#include "downscale/score.hpp"
#include "downscale/synth.hpp"
#include "downscale/train.hpp"
#include "downscale/transform.hpp"

namespace {

dsc::HourRange parse_years(const std::string& spec) {
    const auto pos = spec.find(':');
    dsc::require(pos != std::string::npos, "expected years as A:B, got " + spec);
    const int a = std::stoi(spec.substr(0, pos));
    const int b = std::stoi(spec.substr(pos + 1));
    dsc::require(b >= a, "years range end before start");
    return dsc::year_range(a, b);
}

std::map<std::string, std::string> parse_var_map(const std::string& spec) {
    std::map<std::string, std::string> out;
    std::size_t start = 0;
    while (start < spec.size()) {
        std::size_t comma = spec.find(',', start);
        if (comma == std::string::npos) comma = spec.size();
        const std::string pair = spec.substr(start, comma - start);
        const std::size_t eq = pair.find('=');
        dsc::require(eq != std::string::npos, "variable mapping entries must be store=archive");
        out[pair.substr(0, eq)] = pair.substr(eq + 1);
        start = comma + 1;
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    dsc::require(in.good(), "cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    dsc::require(out.good(), "cannot write " + path);
    out << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic precipitation downscaling benchmark"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Convert archive files into a chunk store");
    std::string ingest_kind, ingest_src, ingest_store, ingest_years, ingest_map;
    double ingest_lr_res = 0.25, ingest_hr_res = 0.1;
    ingest->add_option("--kind", ingest_kind, "predictors | target | static")->required();
    ingest->add_option("--src", ingest_src, "directory of .gar archive files")->required();
    ingest->add_option("--store", ingest_store, "store directory")->required();
    ingest->add_option("--years", ingest_years, "inclusive year range A:B");
    ingest->add_option("--map", ingest_map,
                       "variable mapping store=archive[,..]; twc and tlwc must be mapped");
    ingest->add_option("--lr-resolution", ingest_lr_res, "predictor grid cell size (degrees)");
    ingest->add_option("--hr-resolution", ingest_hr_res, "target grid cell size (degrees)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a procedural miniature store");
    std::string synth_config, synth_store;
    std::uint64_t synth_seed = 1;
    synth->add_option("--config", synth_config, "synth config JSON (optional)");
    synth->add_option("--store", synth_store, "output store directory")->required();
    synth->add_option("--seed", synth_seed, "generation seed");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Compute normalization statistics");
    std::string stats_store, stats_region, stats_years, stats_out, stats_scope = "train_region";
    stats_cmd->add_option("--store", stats_store)->required();
    stats_cmd->add_option("--region", stats_region)->required();
    stats_cmd->add_option("--years", stats_years, "inclusive year range A:B (default: coverage)");
    stats_cmd->add_option("--out", stats_out)->required();
    stats_cmd->add_option("--scope", stats_scope, "train_region | full_domain");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train one region model");
    std::string train_store, train_region_id, train_config, train_out;
    train_cmd->add_option("--store", train_store)->required();
    train_cmd->add_option("--region", train_region_id)->required();
    train_cmd->add_option("--config", train_config, "TrainSetup JSON");
    train_cmd->add_option("--out", train_out, "checkpoint directory")->required();

    // gradcheck
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    std::string gc_config;
    gc_cmd->add_option("--config", gc_config, "tiny-config JSON (optional)");

    // baseline
    auto* base_cmd = app.add_subcommand("baseline", "Bilinear reference forecast");
    std::string base_store, base_region, base_years, base_out;
    base_cmd->add_option("--store", base_store)->required();
    base_cmd->add_option("--region", base_region)->required();
    base_cmd->add_option("--years", base_years, "inclusive year range A:B (default: coverage)");
    base_cmd->add_option("--out", base_out)->required();

    // score
    auto* score_cmd = app.add_subcommand("score", "Score stored ensemble forecasts");
    std::string score_fc, score_obs, score_region_id, score_out;
    int score_members = 8, score_stride = 1;
    score_cmd->add_option("--forecasts", score_fc, "directory of member stores m0..m{k-1}")
        ->required();
    score_cmd->add_option("--obs", score_obs, "observation store")->required();
    score_cmd->add_option("--region", score_region_id)->required();
    score_cmd->add_option("--members", score_members);
    score_cmd->add_option("--stride", score_stride, "hours between scored timestamps");
    score_cmd->add_option("--out", score_out, "output CSV (default stdout)");

    // matrix / ablate / report
    auto* matrix_cmd = app.add_subcommand("matrix", "Run the transfer matrix");
    std::string mx_plan, mx_store, mx_out;
    int mx_max_cells = 0;
    matrix_cmd->add_option("--plan", mx_plan)->required();
    matrix_cmd->add_option("--store", mx_store)->required();
    matrix_cmd->add_option("--out", mx_out)->required();
    matrix_cmd->add_option("--max-cells", mx_max_cells,
                           "stop after N newly computed cells (resumable)");

    auto* ablate_cmd = app.add_subcommand("ablate", "Run matched geo/nogeo matrices");
    std::string ab_plan, ab_store, ab_out;
    int ab_max_cells = 0;
    ablate_cmd->add_option("--plan", ab_plan)->required();
    ablate_cmd->add_option("--store", ab_store)->required();
    ablate_cmd->add_option("--out", ab_out)->required();
    ablate_cmd->add_option("--max-cells", ab_max_cells);

    auto* report_cmd = app.add_subcommand("report", "Emit CSV tables and maps");
    std::string rp_in, rp_out;
    report_cmd->add_option("--in", rp_in, "matrix results directory")->required();
    report_cmd->add_option("--out", rp_out, "report directory")->required();

    // regions
    auto* regions_cmd = app.add_subcommand("regions", "Export region definitions as JSON");
    std::string regions_out;
    regions_cmd->add_option("--out", regions_out, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            dsc::Store store = [&]() {
                if (std::filesystem::exists(ingest_store + "/manifest.json")) {
                    return dsc::Store(ingest_store);
                }
                return dsc::Store(ingest_store, dsc::full_domain(ingest_lr_res),
                                  dsc::full_domain(ingest_hr_res));
            }();
            const auto files = dsc::list_archives(ingest_src);
            dsc::require(!files.empty(), "no .gar archives under " + ingest_src);
            if (ingest_kind == "static") {
                std::string orog_file, lsm_file;
                for (const auto& f : files) {
                    const dsc::ArchiveField a = dsc::read_archive(f);
                    if (a.variable == "orog") orog_file = f;
                    if (a.variable == "lsm") lsm_file = f;
                }
                dsc::require(!orog_file.empty() && !lsm_file.empty(),
                             "static ingest needs orog and lsm archives");
                dsc::ingest_static(store, orog_file, lsm_file);
            } else {
                dsc::IngestOptions opt;
                dsc::require(!ingest_years.empty(), "--years is required for timed ingest");
                opt.hours = parse_years(ingest_years);
                if (!ingest_map.empty()) opt.var_map = parse_var_map(ingest_map);
                if (ingest_kind == "predictors") {
                    dsc::ingest_predictors(store, files, opt);
                } else if (ingest_kind == "target") {
                    dsc::ingest_target(store, files, opt);
                } else {
                    throw dsc::Error("unknown ingest kind: " + ingest_kind);
                }
            }
            std::cout << "ingested " << ingest_kind << " into " << ingest_store << "\n";
        } else if (*synth) {
            dsc::SynthConfig cfg;
            if (!synth_config.empty()) cfg = dsc::SynthConfig::from_json_file(synth_config);
            dsc::synth_generate(cfg, synth_store, synth_seed);
            std::cout << "synthetic store written to " << synth_store << "\n";
        } else if (*stats_cmd) {
            const dsc::Store store(stats_store);
            const dsc::Region& region = dsc::region_by_id(stats_region);
            const dsc::HourRange hours = stats_years.empty()
                                             ? store.manifest().coverage("target_precip")
                                             : parse_years(stats_years);
            const dsc::StatsScope scope = stats_scope == "full_domain"
                                              ? dsc::StatsScope::full_domain
                                              : dsc::StatsScope::train_region;
            const dsc::NormStats stats = dsc::compute_stats(store, region, hours, scope);
            write_file(stats_out, stats.to_json());
            std::cout << "stats written to " << stats_out << "\n";
        } else if (*train_cmd) {
            const dsc::Store store(train_store);
            const dsc::Region& region = dsc::region_by_id(train_region_id);
            dsc::TrainSetup setup;
            if (!train_config.empty()) setup = dsc::TrainSetup::from_json_file(train_config);
            dsc::ExperimentPlan plan;  // reuse the proportional split default
            plan.train_regions = {train_region_id};
            plan.setup = setup;
            const dsc::SplitRanges split = dsc::temporal_split(plan, store);
            const dsc::NormStats stats =
                dsc::compute_stats(store, region, split.train, dsc::StatsScope::train_region);
            const dsc::TrainResult res =
                dsc::train_model(store, region, stats, setup, split.train, split.val, train_out);
            if (res.aborted) {
                std::cerr << "training aborted: " << res.abort_reason << "\n";
                return 1;
            }
            std::cout << "best checkpoint: " << res.best_file << " (val CRPS ";
            for (std::size_t e = 0; e < res.val_crps_per_epoch.size(); ++e) {
                std::cout << (e ? ", " : "") << res.val_crps_per_epoch[e];
            }
            std::cout << ")\n";
        } else if (*gc_cmd) {
            dsc::GradCheckConfig cfg;
            if (!gc_config.empty()) cfg = dsc::GradCheckConfig::from_json_file(gc_config);
            const dsc::GradCheckReport rep = dsc::grad_check(cfg);
            std::cout << "critic: max rel err " << rep.max_rel_err_critic << " over "
                      << rep.critic_params_checked << " parameters\n"
                      << "generator: max rel err " << rep.max_rel_err_gen << " over "
                      << rep.gen_params_checked << " parameters\n";
            return rep.max_rel_err() <= 1e-6 ? 0 : 1;
        } else if (*base_cmd) {
            const dsc::Store store(base_store);
            const dsc::Region& region = dsc::region_by_id(base_region);
            const dsc::HourRange hours = base_years.empty()
                                             ? store.manifest().coverage("tp")
                                             : parse_years(base_years);
            dsc::baseline_forecast(store, region, hours, base_out);
            std::cout << "baseline forecast written to " << base_out << "\n";
        } else if (*score_cmd) {
            const dsc::Store obs(score_obs);
            const dsc::Region& region = dsc::region_by_id(score_region_id);
            dsc::require(region.atomic(), "score: region must be atomic");
            std::vector<dsc::Store> member_stores;
            for (int m = 0; m < score_members; ++m) {
                member_stores.emplace_back(score_fc + "/m" + std::to_string(m));
            }
            const dsc::IndexBox hr_box = dsc::slice_one(obs.hr_grid(), region.id);
            const dsc::HourRange hours = member_stores[0].manifest().coverage("target_precip");
            const dsc::ScoreGrid sg = dsc::score_region(
                obs, region.id, hr_box, hours, score_stride, [&](dsc::EpochHour t) {
                    std::vector<std::vector<double>> members;
                    for (const auto& ms : member_stores) {
                        const dsc::GridSpec& g = ms.hr_grid();
                        const dsc::FieldChunk w =
                            ms.read_window("target_precip", t, 1, {0, g.n_lat, 0, g.n_lon});
                        members.emplace_back(w.values.begin(), w.values.end());
                    }
                    return members;
                });
            const double total = dsc::aggregate(sg);
            std::string csv = "region,members,crps\n" + region.id + "," +
                              std::to_string(score_members) + "," + std::to_string(total) + "\n";
            if (score_out.empty()) {
                std::cout << csv;
            } else {
                write_file(score_out, csv);
            }
        } else if (*matrix_cmd) {
            const dsc::ExperimentPlan plan = dsc::ExperimentPlan::from_json_file(mx_plan);
            const dsc::Store store(mx_store);
            const dsc::MatrixRunResult res = dsc::run_matrix(plan, store, mx_out, mx_max_cells);
            std::cout << (res.complete ? "matrix complete" : "matrix incomplete (cell budget)")
                      << (res.any_failed ? ", with failed cells" : "") << "\n";
            return res.any_failed ? 2 : 0;
        } else if (*ablate_cmd) {
            const dsc::ExperimentPlan plan = dsc::ExperimentPlan::from_json_file(ab_plan);
            const dsc::Store store(ab_store);
            const dsc::MatrixRunResult res = dsc::run_ablation(plan, store, ab_out, ab_max_cells);
            std::cout << (res.complete ? "ablation complete" : "ablation incomplete (cell budget)")
                      << (res.any_failed ? ", with failed cells" : "") << "\n";
            return res.any_failed ? 2 : 0;
        } else if (*report_cmd) {
            dsc::emit_report(rp_in, rp_out);
            std::cout << "report written to " << rp_out << "\n";
        } else if (*regions_cmd) {
            const std::string doc = dsc::regions_json();
            if (regions_out.empty()) {
                std::cout << doc;
            } else {
                write_file(regions_out, doc);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
