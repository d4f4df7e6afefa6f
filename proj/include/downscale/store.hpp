#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "downscale/grid.hpp"
#include "downscale/timeutil.hpp"

namespace dsc {

enum class VarKind { predictor, static_field, target };

struct VariableId {
    std::string name;
    VarKind kind;
    double native_resolution;  // degrees, for the paper's grids
};

// The nine ERA5 predictors at 0.25, two statics and the target at 0.1.
const std::vector<VariableId>& all_variables();
const VariableId& variable_by_name(const std::string& name);
std::uint16_t variable_code(const std::string& name);

// Header codes above the physical range, used when score maps are written in
// the chunk format.
constexpr std::uint16_t kScoreCrpsCode = 100;
constexpr std::uint16_t kScoreHoursCode = 101;

// A time-stamped block of one variable's gridded values, [time, lat, lon]
// row-major. `missing` is empty when every cell is valid, else one flag per
// value.
struct FieldChunk {
    std::string variable;
    EpochHour start_time = 0;
    int n_steps = 0;
    GridSpec grid;
    std::vector<float> values;
    std::vector<std::uint8_t> missing;

    std::size_t plane_size() const { return static_cast<std::size_t>(grid.n_lat) * grid.n_lon; }
    float at(int t, int i, int j) const {
        return values[(static_cast<std::size_t>(t) * grid.n_lat + i) * grid.n_lon + j];
    }
    bool is_missing(int t, int i, int j) const {
        if (missing.empty()) return false;
        return missing[(static_cast<std::size_t>(t) * grid.n_lat + i) * grid.n_lon + j] != 0;
    }
};

struct ChunkInfo {
    std::string file;  // relative to the store directory
    std::string variable;
    EpochHour start_time = 0;
    int n_steps = 0;
    std::uint32_t crc32 = 0;
    bool has_mask = false;
};

struct Manifest {
    GridSpec lr_grid;  // predictor grid
    GridSpec hr_grid;  // static/target grid
    std::map<std::string, std::vector<ChunkInfo>> chunks;  // by variable, time-ordered

    std::int64_t total_steps(const std::string& variable) const;
    HourRange coverage(const std::string& variable) const;
};

// Chunked flat-binary tensor store: one file per (variable, calendar month)
// under <dir>/chunks, a JSON manifest with CRCs, missing-data bitmaps in
// .mask sidecars. Chunk files: 64-byte header (magic, version, variable code,
// grid bounds as f64, resolution, n_steps, start epoch hour, layout tag),
// then little-endian float32 [time, lat, lon].
class Store {
public:
    // Opens an existing store.
    explicit Store(const std::string& dir);
    // Creates an empty store with the given grids.
    Store(const std::string& dir, const GridSpec& lr_grid, const GridSpec& hr_grid);

    const std::string& dir() const { return dir_; }
    const Manifest& manifest() const { return manifest_; }
    const GridSpec& lr_grid() const { return manifest_.lr_grid; }
    const GridSpec& hr_grid() const { return manifest_.hr_grid; }
    const GridSpec& grid_for(const std::string& variable) const;

    // Writes one chunk (replacing any existing chunk with the same variable
    // and start time) and updates the manifest atomically.
    void write_chunk(const FieldChunk& chunk);

    // Reads the sub-block [t0, t0+n_steps) x box; bit-identical to ingestion.
    FieldChunk read_window(const std::string& variable, EpochHour t0, int n_steps,
                           const IndexBox& box) const;
    FieldChunk read_full(const std::string& variable, EpochHour t0, int n_steps) const;

    // Static fields are stored as single-step chunks at hour 0.
    FieldChunk read_static(const std::string& variable, const IndexBox& box) const;

    // Drops cached chunk payloads (reads re-fetch from disk).
    void drop_cache() const;

private:
    const ChunkInfo& chunk_covering(const std::string& variable, EpochHour t) const;
    std::shared_ptr<const FieldChunk> load_chunk(const ChunkInfo& info) const;
    void save_manifest() const;

    std::string dir_;
    Manifest manifest_;
    // Concurrent reads are allowed; the payload cache is the only shared
    // mutable state. Held by pointer so Store stays movable.
    mutable std::unique_ptr<std::mutex> cache_mutex_ = std::make_unique<std::mutex>();
    mutable std::map<std::string, std::shared_ptr<const FieldChunk>> cache_;
};

struct IngestOptions {
    HourRange hours;                               // which hours to keep
    std::map<std::string, std::string> var_map;    // store name -> archive name
};

// Low-level chunk-file writer (64-byte header + float32 payload), shared with
// score-map output. Returns the CRC32 of the bytes written.
std::uint32_t write_chunk_file(const std::string& path, std::uint16_t var_code,
                               const GridSpec& grid, EpochHour start_time,
                               const std::vector<float>& values);

// ERA5-style hourly predictors at the LR grid. One chunk per variable and
// calendar month; rerunning overwrites byte-identically. Errors list missing
// hours; grids are validated against the store's LR grid.
void ingest_predictors(Store& store, const std::vector<std::string>& files,
                       const IngestOptions& opt);

// IMERG-style half-hourly target at the HR grid, averaged to hourly. Negative
// and fill values are flagged missing before averaging; an hour with either
// half-hour missing is missing.
void ingest_target(Store& store, const std::vector<std::string>& files, const IngestOptions& opt);

// Orography (native geopotential units) and land-sea mask (clamped to [0,1]).
void ingest_static(Store& store, const std::string& orography_file, const std::string& lsm_file);

}  // namespace dsc
