#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace dsc {

// Self-describing gridded archive file: the exchange format ingestion reads.
// Layout: magic "GAR1", u32 header length, JSON header, raw payload.
// The header names dimensions, carries coordinate vectors (cell centers for
// lat/lon, fractional epoch hours for time) and an optional fill value; the
// payload is row-major over the named dimensions in float32 or float64.
struct ArchiveField {
    std::string variable;
    std::vector<std::string> dims;    // e.g. {"time", "lat", "lon"} or {"lat", "lon"}
    std::vector<double> time_coords;  // fractional epoch hours; empty for static fields
    std::vector<double> lat_coords;   // cell centers, ascending northward
    std::vector<double> lon_coords;   // cell centers, ascending eastward
    double fill_value = std::numeric_limits<double>::quiet_NaN();
    bool has_fill = false;
    std::vector<double> values;       // row-major [time?, lat, lon], widened to double

    std::size_t plane_size() const { return lat_coords.size() * lon_coords.size(); }
    std::size_t n_steps() const { return time_coords.empty() ? 1 : time_coords.size(); }
};

ArchiveField read_archive(const std::string& path);

// dtype: "f32" or "f64".
void write_archive(const std::string& path, const ArchiveField& field,
                   const std::string& dtype = "f32");

std::vector<std::string> list_archives(const std::string& dir);

}  // namespace dsc
