#include "downscale/store.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "downscale/archive.hpp"
#include "downscale/error.hpp"

namespace dsc {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<VariableId>& all_variables() {
    static const std::vector<VariableId> vars = {
        {"tp", VarKind::predictor, 0.25},   {"cp", VarKind::predictor, 0.25},
        {"cape", VarKind::predictor, 0.25}, {"twc", VarKind::predictor, 0.25},
        {"tlwc", VarKind::predictor, 0.25}, {"sp", VarKind::predictor, 0.25},
        {"tisr", VarKind::predictor, 0.25}, {"u700", VarKind::predictor, 0.25},
        {"v700", VarKind::predictor, 0.25}, {"lsm", VarKind::static_field, 0.1},
        {"orog", VarKind::static_field, 0.1}, {"target_precip", VarKind::target, 0.1},
    };
    return vars;
}

const VariableId& variable_by_name(const std::string& name) {
    for (const auto& v : all_variables()) {
        if (v.name == name) return v;
    }
    throw Error("unknown variable: " + name);
}

std::uint16_t variable_code(const std::string& name) {
    const auto& vars = all_variables();
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (vars[i].name == name) return static_cast<std::uint16_t>(i);
    }
    throw Error("unknown variable: " + name);
}

namespace {

constexpr char kMagic[4] = {'D', 'S', 'C', '1'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint32_t kLayoutTimeLatLon = 0;

bool is_precip(const std::string& name) {
    return name == "tp" || name == "cp" || name == "target_precip";
}

#pragma pack(push, 1)
struct ChunkHeader {
    char magic[4];
    std::uint16_t version;
    std::uint16_t variable;
    double lat_min;
    double lat_max;
    double lon_min;
    double lon_max;
    double resolution;
    std::uint32_t n_steps;
    std::int64_t start_time;
    std::uint32_t layout;
};
#pragma pack(pop)
static_assert(sizeof(ChunkHeader) == 64, "chunk header must be exactly 64 bytes");

std::string month_tag(EpochHour t) {
    using namespace std::chrono;
    const sys_days d{days{t / 24}};
    year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()));
    return buf;
}

json grid_to_json(const GridSpec& g) {
    return {{"lat_min", g.lat_min}, {"lat_max", g.lat_max}, {"lon_min", g.lon_min},
            {"lon_max", g.lon_max}, {"resolution", g.resolution}};
}

GridSpec grid_from_json(const json& j) {
    return GridSpec(j.at("lat_min").get<double>(), j.at("lat_max").get<double>(),
                    j.at("lon_min").get<double>(), j.at("lon_max").get<double>(),
                    j.at("resolution").get<double>());
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot write " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        require(out.good(), "short write to " + tmp);
    }
    fs::rename(tmp, path);
}

}  // namespace

std::uint32_t write_chunk_file(const std::string& path, std::uint16_t var_code,
                               const GridSpec& grid, EpochHour start_time,
                               const std::vector<float>& values) {
    const std::size_t plane = static_cast<std::size_t>(grid.n_lat) * grid.n_lon;
    require(plane > 0 && values.size() % plane == 0, "chunk: values do not tile the grid");
    ChunkHeader h{};
    std::memcpy(h.magic, kMagic, 4);
    h.version = kVersion;
    h.variable = var_code;
    h.lat_min = grid.lat_min;
    h.lat_max = grid.lat_max;
    h.lon_min = grid.lon_min;
    h.lon_max = grid.lon_max;
    h.resolution = grid.resolution;
    h.n_steps = static_cast<std::uint32_t>(values.size() / plane);
    h.start_time = start_time;
    h.layout = kLayoutTimeLatLon;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "chunk: cannot write " + path);
    out.write(reinterpret_cast<const char*>(&h), sizeof(h));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * 4));
    require(out.good(), "chunk: short write to " + path);

    std::uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(&h), sizeof(h));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(values.data()),
                static_cast<uInt>(values.size() * 4));
    return crc;
}

std::int64_t Manifest::total_steps(const std::string& variable) const {
    auto it = chunks.find(variable);
    if (it == chunks.end()) return 0;
    std::int64_t n = 0;
    for (const auto& c : it->second) n += c.n_steps;
    return n;
}

HourRange Manifest::coverage(const std::string& variable) const {
    auto it = chunks.find(variable);
    if (it == chunks.end() || it->second.empty()) return {};
    return {it->second.front().start_time,
            it->second.back().start_time + it->second.back().n_steps};
}

Store::Store(const std::string& dir) : dir_(dir) {
    const std::string path = dir_ + "/manifest.json";
    std::ifstream in(path);
    require(in.good(), "store: no manifest at " + path);
    json doc = json::parse(in);
    manifest_.lr_grid = grid_from_json(doc.at("lr_grid"));
    manifest_.hr_grid = grid_from_json(doc.at("hr_grid"));
    for (const auto& [var, arr] : doc.at("chunks").items()) {
        std::vector<ChunkInfo>& v = manifest_.chunks[var];
        for (const auto& c : arr) {
            v.push_back({c.at("file").get<std::string>(), var,
                         c.at("start_time").get<EpochHour>(), c.at("n_steps").get<int>(),
                         c.at("crc32").get<std::uint32_t>(), c.at("has_mask").get<bool>()});
        }
    }
}

Store::Store(const std::string& dir, const GridSpec& lr_grid, const GridSpec& hr_grid)
    : dir_(dir) {
    manifest_.lr_grid = lr_grid;
    manifest_.hr_grid = hr_grid;
    fs::create_directories(dir_ + "/chunks");
    save_manifest();
}

const GridSpec& Store::grid_for(const std::string& variable) const {
    return variable_by_name(variable).kind == VarKind::predictor ? manifest_.lr_grid
                                                                 : manifest_.hr_grid;
}

void Store::save_manifest() const {
    json doc;
    doc["format_version"] = 1;
    doc["lr_grid"] = grid_to_json(manifest_.lr_grid);
    doc["hr_grid"] = grid_to_json(manifest_.hr_grid);
    json chunks = json::object();
    for (const auto& [var, list] : manifest_.chunks) {
        json arr = json::array();
        for (const auto& c : list) {
            arr.push_back({{"file", c.file},
                           {"start_time", c.start_time},
                           {"n_steps", c.n_steps},
                           {"crc32", c.crc32},
                           {"has_mask", c.has_mask}});
        }
        chunks[var] = arr;
    }
    doc["chunks"] = chunks;
    atomic_write(dir_ + "/manifest.json", doc.dump(2) + "\n");
}

void Store::write_chunk(const FieldChunk& chunk) {
    const GridSpec& expected = grid_for(chunk.variable);
    require(chunk.grid == expected, "store: chunk grid mismatch for " + chunk.variable);
    require(chunk.n_steps > 0 &&
                chunk.values.size() == chunk.plane_size() * static_cast<std::size_t>(chunk.n_steps),
            "store: chunk size mismatch for " + chunk.variable);

    const bool is_static = variable_by_name(chunk.variable).kind == VarKind::static_field;
    const std::string rel = "chunks/" + chunk.variable + "_" +
                            (is_static ? std::string("static") : month_tag(chunk.start_time)) +
                            ".bin";
    const std::string path = dir_ + "/" + rel;
    const std::uint32_t crc = write_chunk_file(path, variable_code(chunk.variable), chunk.grid,
                                               chunk.start_time, chunk.values);

    const bool has_mask = !chunk.missing.empty() &&
                          std::any_of(chunk.missing.begin(), chunk.missing.end(),
                                      [](std::uint8_t m) { return m != 0; });
    const std::string mask_path = path + ".mask";
    if (has_mask) {
        std::vector<std::uint8_t> bits((chunk.missing.size() + 7) / 8, 0);
        for (std::size_t i = 0; i < chunk.missing.size(); ++i) {
            if (chunk.missing[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        }
        std::ofstream out(mask_path, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bits.data()),
                  static_cast<std::streamsize>(bits.size()));
        require(out.good(), "store: cannot write mask " + mask_path);
    } else if (fs::exists(mask_path)) {
        fs::remove(mask_path);
    }

    auto& list = manifest_.chunks[chunk.variable];
    const EpochHour b = chunk.start_time;
    const EpochHour e = b + chunk.n_steps;
    for (const auto& c : list) {
        if (c.start_time == b && c.n_steps == chunk.n_steps) continue;  // replacement
        const EpochHour cb = c.start_time, ce = c.start_time + c.n_steps;
        require(e <= cb || ce <= b, "store: overlapping time range for " + chunk.variable);
    }
    list.erase(std::remove_if(list.begin(), list.end(),
                              [&](const ChunkInfo& c) { return c.start_time == b; }),
               list.end());
    list.push_back({rel, chunk.variable, b, chunk.n_steps, crc, has_mask});
    std::sort(list.begin(), list.end(),
              [](const ChunkInfo& a, const ChunkInfo& c) { return a.start_time < c.start_time; });
    {
        std::lock_guard<std::mutex> lock(*cache_mutex_);
        cache_.erase(rel);
    }
    save_manifest();
}

const ChunkInfo& Store::chunk_covering(const std::string& variable, EpochHour t) const {
    auto it = manifest_.chunks.find(variable);
    require(it != manifest_.chunks.end(), "store: no chunks for variable " + variable);
    for (const auto& c : it->second) {
        if (t >= c.start_time && t < c.start_time + c.n_steps) return c;
    }
    throw Error("store: hour " + format_hour(t) + " outside stored extent of " + variable);
}

std::shared_ptr<const FieldChunk> Store::load_chunk(const ChunkInfo& info) const {
    {
        std::lock_guard<std::mutex> lock(*cache_mutex_);
        auto it = cache_.find(info.file);
        if (it != cache_.end()) return it->second;
    }

    const std::string path = dir_ + "/" + info.file;
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "store: cannot open " + path);
    ChunkHeader h{};
    in.read(reinterpret_cast<char*>(&h), sizeof(h));
    require(in.good() && std::memcmp(h.magic, kMagic, 4) == 0, "store: bad chunk magic in " + path);
    require(h.version == kVersion && h.layout == kLayoutTimeLatLon,
            "store: unsupported chunk format in " + path);

    auto chunk = std::make_shared<FieldChunk>();
    chunk->variable = info.variable;
    chunk->start_time = h.start_time;
    chunk->n_steps = static_cast<int>(h.n_steps);
    chunk->grid = GridSpec(h.lat_min, h.lat_max, h.lon_min, h.lon_max, h.resolution);
    const std::size_t n = chunk->plane_size() * h.n_steps;
    chunk->values.resize(n);
    in.read(reinterpret_cast<char*>(chunk->values.data()), static_cast<std::streamsize>(n * 4));
    require(in.gcount() == static_cast<std::streamsize>(n * 4), "store: truncated chunk " + path);

    if (info.has_mask) {
        std::ifstream min(path + ".mask", std::ios::binary);
        require(min.good(), "store: missing mask sidecar for " + path);
        std::vector<std::uint8_t> bits((n + 7) / 8);
        min.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
        require(min.gcount() == static_cast<std::streamsize>(bits.size()),
                "store: truncated mask for " + path);
        chunk->missing.resize(n);
        for (std::size_t i = 0; i < n; ++i) chunk->missing[i] = (bits[i / 8] >> (i % 8)) & 1u;
    }
    std::lock_guard<std::mutex> lock(*cache_mutex_);
    auto [it, inserted] = cache_.emplace(info.file, chunk);
    return it->second;
}

FieldChunk Store::read_window(const std::string& variable, EpochHour t0, int n_steps,
                              const IndexBox& box) const {
    const GridSpec& g = grid_for(variable);
    require(box.lat_begin >= 0 && box.lat_end <= g.n_lat && box.lon_begin >= 0 &&
                box.lon_end <= g.n_lon && box.n_lat() > 0 && box.n_lon() > 0,
            "store: window outside grid for " + variable);
    require(n_steps > 0, "store: empty time window");

    FieldChunk out;
    out.variable = variable;
    out.start_time = t0;
    out.n_steps = n_steps;
    out.grid = GridSpec(g.lat_min + box.lat_begin * g.resolution,
                        g.lat_min + box.lat_end * g.resolution,
                        g.lon_min + box.lon_begin * g.resolution,
                        g.lon_min + box.lon_end * g.resolution, g.resolution);
    const std::size_t plane = out.plane_size();
    out.values.resize(plane * n_steps);
    bool any_missing = false;

    for (int t = 0; t < n_steps; ++t) {
        const ChunkInfo& info = chunk_covering(variable, t0 + t);
        auto chunk = load_chunk(info);
        const int ct = static_cast<int>(t0 + t - info.start_time);
        for (int i = 0; i < box.n_lat(); ++i) {
            const std::size_t src =
                (static_cast<std::size_t>(ct) * g.n_lat + box.lat_begin + i) * g.n_lon +
                box.lon_begin;
            const std::size_t dst = (static_cast<std::size_t>(t) * out.grid.n_lat + i) * out.grid.n_lon;
            std::memcpy(&out.values[dst], &chunk->values[src],
                        static_cast<std::size_t>(box.n_lon()) * 4);
            if (!chunk->missing.empty()) {
                if (out.missing.empty()) out.missing.assign(plane * n_steps, 0);
                std::memcpy(&out.missing[dst], &chunk->missing[src],
                            static_cast<std::size_t>(box.n_lon()));
                any_missing = true;
            }
        }
    }
    if (!any_missing) out.missing.clear();
    return out;
}

FieldChunk Store::read_full(const std::string& variable, EpochHour t0, int n_steps) const {
    const GridSpec& g = grid_for(variable);
    return read_window(variable, t0, n_steps, {0, g.n_lat, 0, g.n_lon});
}

FieldChunk Store::read_static(const std::string& variable, const IndexBox& box) const {
    require(variable_by_name(variable).kind == VarKind::static_field,
            "store: not a static variable: " + variable);
    return read_window(variable, 0, 1, box);
}

void Store::drop_cache() const {
    std::lock_guard<std::mutex> lock(*cache_mutex_);
    cache_.clear();
}

namespace {

struct Plane {
    std::vector<float> values;
    std::vector<std::uint8_t> missing;
    bool any_missing = false;
};

void validate_coords(const ArchiveField& f, const GridSpec& g, const std::string& path) {
    require(static_cast<int>(f.lat_coords.size()) == g.n_lat &&
                static_cast<int>(f.lon_coords.size()) == g.n_lon,
            "ingest: grid shape mismatch in " + path + " (expected " + std::to_string(g.n_lat) +
                "x" + std::to_string(g.n_lon) + ", got " + std::to_string(f.lat_coords.size()) +
                "x" + std::to_string(f.lon_coords.size()) + ")");
    for (int i = 0; i < g.n_lat; ++i) {
        require(std::abs(f.lat_coords[i] - g.lat_center(i)) <= 1e-6,
                "ingest: latitude coordinates in " + path + " do not match the store grid");
    }
    for (int j = 0; j < g.n_lon; ++j) {
        require(std::abs(f.lon_coords[j] - g.lon_center(j)) <= 1e-6,
                "ingest: longitude coordinates in " + path + " do not match the store grid");
    }
}

bool value_missing(double v, const ArchiveField& f, bool negatives_are_fill) {
    if (std::isnan(v)) return true;
    if (f.has_fill && v == f.fill_value) return true;
    if (negatives_are_fill && v < 0.0) return true;
    return false;
}

// Splits [hours.begin, hours.end) planes into calendar-month chunks.
void emit_monthly(Store& store, const std::string& variable, EpochHour begin,
                  const std::vector<Plane>& planes) {
    const GridSpec& g = store.grid_for(variable);
    const std::size_t plane = static_cast<std::size_t>(g.n_lat) * g.n_lon;
    EpochHour t = begin;
    const EpochHour end = begin + static_cast<EpochHour>(planes.size());
    while (t < end) {
        const EpochHour chunk_end = std::min(end, next_month_start(t));
        FieldChunk chunk;
        chunk.variable = variable;
        chunk.start_time = t;
        chunk.n_steps = static_cast<int>(chunk_end - t);
        chunk.grid = g;
        chunk.values.resize(plane * chunk.n_steps);
        bool any_missing = false;
        for (EpochHour h = t; h < chunk_end; ++h) {
            if (planes[h - begin].any_missing) any_missing = true;
        }
        if (any_missing) chunk.missing.assign(plane * chunk.n_steps, 0);
        for (EpochHour h = t; h < chunk_end; ++h) {
            const Plane& p = planes[h - begin];
            std::copy(p.values.begin(), p.values.end(),
                      chunk.values.begin() + (h - t) * plane);
            if (any_missing && p.any_missing) {
                std::copy(p.missing.begin(), p.missing.end(),
                          chunk.missing.begin() + (h - t) * plane);
            }
        }
        store.write_chunk(chunk);
        t = chunk_end;
    }
}

std::string gap_message(const std::string& variable, const std::vector<EpochHour>& gaps) {
    std::string msg = "ingest: missing hours for " + variable + ":";
    const std::size_t show = std::min<std::size_t>(gaps.size(), 8);
    for (std::size_t i = 0; i < show; ++i) msg += " " + format_hour(gaps[i]);
    if (gaps.size() > show) msg += " (+" + std::to_string(gaps.size() - show) + " more)";
    return msg;
}

}  // namespace

void ingest_predictors(Store& store, const std::vector<std::string>& files,
                       const IngestOptions& opt) {
    require(!opt.hours.empty(), "ingest: empty hour range");
    // The upstream identifiers for twc/tlwc vary by archive; they must be
    // mapped explicitly rather than guessed.
    for (const char* name : {"twc", "tlwc"}) {
        require(opt.var_map.count(name) > 0,
                std::string("ingest: no archive mapping for '") + name +
                    "'; pass an explicit variable mapping");
    }

    std::map<std::string, std::string> archive_to_store;
    for (const auto& v : all_variables()) {
        if (v.kind != VarKind::predictor) continue;
        auto it = opt.var_map.find(v.name);
        archive_to_store[it != opt.var_map.end() ? it->second : v.name] = v.name;
    }

    const GridSpec& g = store.lr_grid();
    const std::size_t plane = static_cast<std::size_t>(g.n_lat) * g.n_lon;
    std::map<std::string, std::map<EpochHour, Plane>> collected;

    for (const auto& path : files) {
        ArchiveField f = read_archive(path);
        auto it = archive_to_store.find(f.variable);
        if (it == archive_to_store.end()) continue;
        const std::string& var = it->second;
        validate_coords(f, g, path);
        const bool clamp = is_precip(var);
        for (std::size_t s = 0; s < f.n_steps(); ++s) {
            const double tc = f.time_coords[s];
            require(std::abs(tc - std::round(tc)) <= 1e-9,
                    "ingest: non-hourly timestamp in " + path);
            const EpochHour t = static_cast<EpochHour>(std::llround(tc));
            if (!opt.hours.contains(t)) continue;
            Plane p;
            p.values.resize(plane);
            p.missing.assign(plane, 0);
            for (std::size_t i = 0; i < plane; ++i) {
                double v = f.values[s * plane + i];
                if (value_missing(v, f, false)) {
                    p.missing[i] = 1;
                    p.any_missing = true;
                    v = 0.0;
                } else if (clamp && v < 0.0) {
                    v = 0.0;  // reanalysis precip noise
                }
                p.values[i] = static_cast<float>(v);
            }
            if (!p.any_missing) p.missing.clear();
            collected[var][t] = std::move(p);
        }
    }

    for (const auto& v : all_variables()) {
        if (v.kind != VarKind::predictor) continue;
        auto& times = collected[v.name];
        std::vector<EpochHour> gaps;
        for (EpochHour t = opt.hours.begin; t < opt.hours.end; ++t) {
            if (!times.count(t)) gaps.push_back(t);
        }
        if (!gaps.empty()) throw Error(gap_message(v.name, gaps));
        std::vector<Plane> planes;
        planes.reserve(opt.hours.count());
        for (EpochHour t = opt.hours.begin; t < opt.hours.end; ++t) {
            planes.push_back(std::move(times.at(t)));
        }
        emit_monthly(store, v.name, opt.hours.begin, planes);
    }
}

void ingest_target(Store& store, const std::vector<std::string>& files, const IngestOptions& opt) {
    require(!opt.hours.empty(), "ingest: empty hour range");
    const GridSpec& g = store.hr_grid();
    const std::size_t plane = static_cast<std::size_t>(g.n_lat) * g.n_lon;

    // half-hour index = 2*epoch_hour (+1 for the :30 field)
    std::map<std::int64_t, Plane> halves;
    for (const auto& path : files) {
        ArchiveField f = read_archive(path);
        if (f.variable != "target_precip") continue;
        validate_coords(f, g, path);
        for (std::size_t s = 0; s < f.n_steps(); ++s) {
            const double tc = f.time_coords[s] * 2.0;
            require(std::abs(tc - std::round(tc)) <= 1e-9,
                    "ingest: target timestamps must be half-hourly in " + path);
            const std::int64_t half = static_cast<std::int64_t>(std::llround(tc));
            if (half < opt.hours.begin * 2 || half >= opt.hours.end * 2) continue;
            Plane p;
            p.values.resize(plane);
            p.missing.assign(plane, 0);
            for (std::size_t i = 0; i < plane; ++i) {
                double v = f.values[s * plane + i];
                if (value_missing(v, f, /*negatives_are_fill=*/true)) {
                    p.missing[i] = 1;
                    p.any_missing = true;
                    v = 0.0;
                }
                p.values[i] = static_cast<float>(v);
            }
            if (!p.any_missing) p.missing.clear();
            halves[half] = std::move(p);
        }
    }

    {
        std::vector<EpochHour> gaps;
        std::vector<EpochHour> unpaired;
        for (EpochHour t = opt.hours.begin; t < opt.hours.end; ++t) {
            const bool a = halves.count(2 * t) > 0;
            const bool b = halves.count(2 * t + 1) > 0;
            if (!a && !b) gaps.push_back(t);
            else if (a != b) unpaired.push_back(t);
        }
        if (!unpaired.empty()) {
            throw Error("ingest: unpaired half-hourly target steps at " +
                        format_hour(unpaired.front()) +
                        (unpaired.size() > 1
                             ? " (+" + std::to_string(unpaired.size() - 1) + " more)"
                             : ""));
        }
        if (!gaps.empty()) throw Error(gap_message("target_precip", gaps));
    }

    std::vector<Plane> hourly;
    hourly.reserve(opt.hours.count());
    for (EpochHour t = opt.hours.begin; t < opt.hours.end; ++t) {
        const Plane& a = halves.at(2 * t);
        const Plane& b = halves.at(2 * t + 1);
        Plane p;
        p.values.resize(plane);
        p.missing.assign(plane, 0);
        for (std::size_t i = 0; i < plane; ++i) {
            const bool am = a.any_missing && a.missing[i];
            const bool bm = b.any_missing && b.missing[i];
            if (am || bm) {
                p.missing[i] = 1;
                p.any_missing = true;
                p.values[i] = 0.0f;
            } else {
                // float32-exact hourly mean of the two half-hour fields
                p.values[i] = (a.values[i] + b.values[i]) / 2.0f;
            }
        }
        if (!p.any_missing) p.missing.clear();
        hourly.push_back(std::move(p));
    }
    emit_monthly(store, "target_precip", opt.hours.begin, hourly);
}

void ingest_static(Store& store, const std::string& orography_file, const std::string& lsm_file) {
    const GridSpec& g = store.hr_grid();
    const std::size_t plane = static_cast<std::size_t>(g.n_lat) * g.n_lon;

    auto load = [&](const std::string& path, const std::string& var, bool clamp01) {
        ArchiveField f = read_archive(path);
        validate_coords(f, g, path);
        require(f.time_coords.empty(), "ingest: static field has a time dimension: " + path);
        FieldChunk chunk;
        chunk.variable = var;
        chunk.start_time = 0;
        chunk.n_steps = 1;
        chunk.grid = g;
        chunk.values.resize(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            double v = f.values[i];
            require(!value_missing(v, f, false), "ingest: missing values in static field " + path);
            if (clamp01) v = std::clamp(v, 0.0, 1.0);
            chunk.values[i] = static_cast<float>(v);
        }
        store.write_chunk(chunk);
    };
    load(orography_file, "orog", false);
    load(lsm_file, "lsm", true);
}

}  // namespace dsc
