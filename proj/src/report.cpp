#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "downscale/crps.hpp"
#include "downscale/error.hpp"
#include "downscale/experiment.hpp"
#include "downscale/png.hpp"

namespace dsc {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

int canonical_train_index(const std::string& id) {
    const auto all = training_domains();
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i].id == id) return static_cast<int>(i);
    }
    return 1000;
}

int canonical_eval_index(const std::string& id) {
    const auto all = partition();
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i].id == id) return static_cast<int>(i);
    }
    return 1000;
}

void sort_canonical(std::vector<std::string>& trains, std::vector<std::string>& evals) {
    std::sort(trains.begin(), trains.end(), [](const std::string& a, const std::string& b) {
        return canonical_train_index(a) < canonical_train_index(b);
    });
    std::sort(evals.begin(), evals.end(), [](const std::string& a, const std::string& b) {
        return canonical_eval_index(a) < canonical_eval_index(b);
    });
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), "report: cannot write " + path);
    out << content;
    require(out.good(), "report: short write to " + path);
}

// Per-cell map: log10 CRPS on a fixed [-3, 1] range, 6x nearest upscale,
// north at the top.
void render_map(const ScoreGrid& sg, const std::string& path) {
    constexpr int kScale = 6;
    constexpr double kLo = -3.0, kHi = 1.0;
    const int w = sg.grid.n_lon * kScale;
    const int h = sg.grid.n_lat * kScale;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
    for (int py = 0; py < h; ++py) {
        const int i = sg.grid.n_lat - 1 - py / kScale;  // flip: image rows run south
        for (int px = 0; px < w; ++px) {
            const int j = px / kScale;
            const std::size_t k = static_cast<std::size_t>(i) * sg.grid.n_lon + j;
            std::uint8_t* p = &rgb[(static_cast<std::size_t>(py) * w + px) * 3];
            if (sg.hours_counted[k] <= 0 || !std::isfinite(sg.mean_crps[k])) {
                p[0] = p[1] = p[2] = 40;  // unscored
                continue;
            }
            const double lg = std::log10(std::max(sg.mean_crps[k], 1e-12));
            colormap((lg - kLo) / (kHi - kLo), p);
        }
    }
    write_png(path, w, h, rgb);
}

}  // namespace

void emit_report(const std::string& results_dir, const std::string& report_dir) {
    fs::create_directories(report_dir);
    const std::vector<TransferMatrix> matrices = load_matrices(results_dir);
    require(!matrices.empty(), "report: no journaled cells in " + results_dir);

    for (const TransferMatrix& m : matrices) {
        std::vector<std::string> trains = m.train_regions;
        std::vector<std::string> evals = m.eval_regions;
        sort_canonical(trains, evals);
        const std::string v = m.variant;

        // Pinned row schema for the cell scores.
        std::string scores = score_csv_header();
        std::string failures = "train_region,eval_region,cause\n";
        int beat_baseline = 0, counted = 0, failed_count = 0;
        for (const auto& t : trains) {
            for (const auto& e : evals) {
                const CellResult* c = m.cell(t, e);
                if (!c) continue;
                RegionalScore rs;
                rs.train_region = t;
                rs.eval_region = e;
                rs.crps = c->crps;
                rs.baseline_crps = c->baseline_crps;
                rs.direct_crps = m.direct_crps(e);
                scores += score_csv_row(rs);
                if (c->failed) {
                    ++failed_count;
                    failures += t + "," + e + "," + c->cause + "\n";
                }
                if (std::isfinite(c->crps)) {
                    ++counted;
                    if (c->crps < c->baseline_crps) ++beat_baseline;
                }
            }
        }
        write_file(report_dir + "/scores_" + v + ".csv", scores);
        write_file(report_dir + "/failures_" + v + ".csv", failures);

        const auto table = [&](const std::string& name,
                               const std::function<std::string(const CellResult&)>& fn) {
            std::string csv = "train_region";
            for (const auto& e : evals) csv += "," + e;
            csv += "\n";
            for (const auto& t : trains) {
                csv += t;
                for (const auto& e : evals) {
                    const CellResult* c = m.cell(t, e);
                    csv += ",";
                    if (c) csv += fn(*c);
                }
                csv += "\n";
            }
            write_file(report_dir + "/" + name + "_" + v + ".csv", csv);
        };

        table("crps", [](const CellResult& c) { return fmt(c.crps); });
        table("improvement", [](const CellResult& c) {
            return c.baseline_crps > 0.0 ? fmt(improvement(c.crps, c.baseline_crps))
                                         : std::string();
        });
        table("drop", [&](const CellResult& c) {
            const auto direct = m.direct_crps(c.eval_region);
            return direct ? fmt(drop_vs_direct(c.crps, *direct)) : std::string();
        });

        // Counts emitted from the matrix itself (no hard-coded totals).
        std::string summary = "cells,scored,beat_baseline,failed\n";
        summary += std::to_string(m.cells.size()) + "," + std::to_string(counted) + "," +
                   std::to_string(beat_baseline) + "," + std::to_string(failed_count) + "\n";
        write_file(report_dir + "/summary_" + v + ".csv", summary);

        for (const auto& t : trains) {
            for (const auto& e : evals) {
                const std::string prefix = results_dir + "/maps/" + t + "_" + e + "_" + v;
                if (!fs::exists(prefix + "_crps.bin")) continue;
                render_map(read_score_grid(prefix),
                           report_dir + "/" + t + "_" + e + "_" + v + ".png");
            }
        }
    }

    // Variant comparison in the spirit of the ablation table: per cell, which
    // variant wins; failures flagged.
    const TransferMatrix* geo = nullptr;
    const TransferMatrix* nogeo = nullptr;
    for (const auto& m : matrices) {
        if (m.variant == "geo") geo = &m;
        if (m.variant == "nogeo") nogeo = &m;
    }
    if (geo && nogeo) {
        std::vector<std::string> trains = geo->train_regions;
        std::vector<std::string> evals = geo->eval_regions;
        sort_canonical(trains, evals);
        std::string csv =
            "train_region,eval_region,crps_geo,crps_nogeo,winner,failed_geo,failed_nogeo\n";
        for (const auto& t : trains) {
            for (const auto& e : evals) {
                const CellResult* a = geo->cell(t, e);
                const CellResult* b = nogeo->cell(t, e);
                if (!a || !b) continue;
                const bool geo_wins = std::isfinite(a->crps) &&
                                      (!std::isfinite(b->crps) || a->crps <= b->crps);
                csv += t + "," + e + "," + fmt(a->crps) + "," + fmt(b->crps) + "," +
                       (geo_wins ? "geo" : "nogeo") + "," + (a->failed ? "1" : "0") + "," +
                       (b->failed ? "1" : "0") + "\n";
            }
        }
        write_file(report_dir + "/ablation_summary.csv", csv);
    }
}

}  // namespace dsc
