#include "downscale/transform.hpp"

#include <cmath>
#include <future>
#include <nlohmann/json.hpp>

#include "downscale/error.hpp"

namespace dsc {

using nlohmann::json;

double log_fwd(double x) {
    require(x >= 0.0, "log_fwd: negative precipitation " + std::to_string(x));
    return std::log(x + kLogEps);
}

double log_inv(double z) { return std::max(std::exp(z) - kLogEps, 0.0); }

const VarStats& NormStats::for_variable(const std::string& name) const {
    auto it = vars.find(name);
    require(it != vars.end(), "stats: no entry for variable " + name);
    return it->second;
}

std::string NormStats::to_json() const {
    json j;
    j["region"] = region_id;
    j["hours"] = {{"begin", hours.begin}, {"end", hours.end}};
    j["scope"] = scope == StatsScope::train_region ? "train_region" : "full_domain";
    json v = json::object();
    for (const auto& [name, s] : vars) {
        v[name] = {{"mean", s.mean}, {"std", s.std}, {"log", s.log_transformed}};
    }
    j["variables"] = v;
    return j.dump(2) + "\n";
}

NormStats NormStats::from_json(const std::string& text) {
    json j = json::parse(text);
    NormStats out;
    out.region_id = j.at("region").get<std::string>();
    out.hours = {j.at("hours").at("begin").get<EpochHour>(),
                 j.at("hours").at("end").get<EpochHour>()};
    out.scope = j.at("scope").get<std::string>() == "full_domain" ? StatsScope::full_domain
                                                                  : StatsScope::train_region;
    for (const auto& [name, s] : j.at("variables").items()) {
        out.vars[name] = {s.at("mean").get<double>(), s.at("std").get<double>(),
                          s.at("log").get<bool>()};
    }
    return out;
}

void RunningMoments::add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
}

void RunningMoments::merge(const RunningMoments& o) {
    if (o.count == 0) return;
    if (count == 0) {
        *this = o;
        return;
    }
    const double d = o.mean - mean;
    const std::int64_t n = count + o.count;
    mean += d * static_cast<double>(o.count) / static_cast<double>(n);
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) /
                     static_cast<double>(n);
    count = n;
}

namespace {

bool log_flagged(const std::string& name) {
    return name == "tp" || name == "cp" || name == "target_precip";
}

RunningMoments chunk_moments(const Store& store, const std::string& variable, EpochHour t0,
                             int n_steps, const std::vector<IndexBox>& boxes, bool log_space) {
    RunningMoments m;
    for (const auto& box : boxes) {
        const FieldChunk w = store.read_window(variable, t0, n_steps, box);
        const std::size_t n = w.values.size();
        for (std::size_t k = 0; k < n; ++k) {
            if (!w.missing.empty() && w.missing[k]) continue;
            double x = w.values[k];
            if (log_space) x = log_fwd(std::max(0.0, x));
            m.add(x);
        }
    }
    return m;
}

}  // namespace

NormStats compute_stats(const Store& store, const Region& region, const HourRange& hours,
                        StatsScope scope) {
    require(!hours.empty(), "stats: empty hour range");
    NormStats out;
    out.region_id = region.id;
    out.hours = hours;
    out.scope = scope;

    for (const auto& var : all_variables()) {
        if (var.name == "lsm") {
            out.vars["lsm"] = {0.0, 1.0, false};  // passes through unchanged
            continue;
        }
        const GridSpec& g = store.grid_for(var.name);
        std::vector<IndexBox> boxes;
        if (scope == StatsScope::full_domain) {
            boxes.push_back({0, g.n_lat, 0, g.n_lon});
        } else {
            boxes = slice(g, region);
        }
        const bool log_space = log_flagged(var.name);

        // One partial per stored chunk span, merged in time order.
        std::vector<std::pair<EpochHour, int>> spans;
        if (var.kind == VarKind::static_field) {
            spans.emplace_back(0, 1);
        } else {
            const HourRange cov = store.manifest().coverage(var.name);
            require(cov.begin <= hours.begin && cov.end >= hours.end,
                    "stats: store does not cover the requested hours for " + var.name);
            EpochHour t = hours.begin;
            while (t < hours.end) {
                const EpochHour e = std::min(hours.end, next_month_start(t));
                spans.emplace_back(t, static_cast<int>(e - t));
                t = e;
            }
        }

        std::vector<std::future<RunningMoments>> parts;
        parts.reserve(spans.size());
        for (const auto& [t0, n] : spans) {
            parts.push_back(std::async(std::launch::async, chunk_moments, std::cref(store),
                                       var.name, t0, n, std::cref(boxes), log_space));
        }
        RunningMoments total;
        for (auto& f : parts) total.merge(f.get());

        require(total.count > 0, "stats: empty selection for " + var.name);
        const double sd = std::sqrt(total.variance());
        require(sd > 0.0, "stats: zero variance for " + var.name);
        out.vars[var.name] = {total.mean, sd, log_space};
    }
    return out;
}

double normalize_value(double x, const VarStats& s) {
    if (s.log_transformed) x = log_fwd(std::max(0.0, x));
    return (x - s.mean) / s.std;
}

double denormalize_value(double z, const VarStats& s) {
    double x = z * s.std + s.mean;
    if (s.log_transformed) x = log_inv(x);
    return x;
}

void normalize_span(std::vector<double>& values, const VarStats& s) {
    for (double& v : values) v = normalize_value(v, s);
}

void denormalize_span(std::vector<double>& values, const VarStats& s) {
    for (double& v : values) v = denormalize_value(v, s);
}

}  // namespace dsc
