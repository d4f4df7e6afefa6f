#include "downscale/archive.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "downscale/error.hpp"

namespace dsc {

namespace {

constexpr char kMagic[4] = {'G', 'A', 'R', '1'};

}  // namespace

ArchiveField read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "archive: cannot open " + path);

    char magic[4];
    std::uint32_t hlen = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&hlen), 4);
    require(in.good() && std::memcmp(magic, kMagic, 4) == 0, "archive: bad magic in " + path);

    std::string header(hlen, '\0');
    in.read(header.data(), hlen);
    require(in.good(), "archive: truncated header in " + path);

    nlohmann::json h;
    try {
        h = nlohmann::json::parse(header);
    } catch (const std::exception& e) {
        throw Error("archive: invalid header JSON in " + path + ": " + e.what());
    }

    ArchiveField f;
    f.variable = h.at("variable").get<std::string>();
    f.dims = h.at("dims").get<std::vector<std::string>>();
    const auto& coords = h.at("coords");
    f.lat_coords = coords.at("lat").get<std::vector<double>>();
    f.lon_coords = coords.at("lon").get<std::vector<double>>();
    if (coords.contains("time")) f.time_coords = coords.at("time").get<std::vector<double>>();
    if (h.contains("fill_value") && !h.at("fill_value").is_null()) {
        f.fill_value = h.at("fill_value").get<double>();
        f.has_fill = true;
    }
    const std::string dtype = h.at("dtype").get<std::string>();
    require(dtype == "f32" || dtype == "f64", "archive: unsupported dtype " + dtype);

    const bool has_time = std::find(f.dims.begin(), f.dims.end(), "time") != f.dims.end();
    require((has_time && f.dims == std::vector<std::string>{"time", "lat", "lon"}) ||
                (!has_time && f.dims == std::vector<std::string>{"lat", "lon"}),
            "archive: unsupported dims layout in " + path);
    require(has_time == !f.time_coords.empty(), "archive: time dim/coords mismatch in " + path);

    const std::size_t n = f.n_steps() * f.plane_size();
    f.values.resize(n);
    if (dtype == "f32") {
        std::vector<float> raw(n);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 4));
        require(in.gcount() == static_cast<std::streamsize>(n * 4),
                "archive: truncated payload in " + path);
        std::copy(raw.begin(), raw.end(), f.values.begin());
    } else {
        in.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(n * 8));
        require(in.gcount() == static_cast<std::streamsize>(n * 8),
                "archive: truncated payload in " + path);
    }
    return f;
}

void write_archive(const std::string& path, const ArchiveField& field, const std::string& dtype) {
    require(dtype == "f32" || dtype == "f64", "archive: unsupported dtype " + dtype);
    const std::size_t n = field.n_steps() * field.plane_size();
    require(field.values.size() == n, "archive: value count does not match coords");

    nlohmann::json h;
    h["variable"] = field.variable;
    h["dims"] = field.dims;
    h["dtype"] = dtype;
    nlohmann::json coords;
    if (!field.time_coords.empty()) coords["time"] = field.time_coords;
    coords["lat"] = field.lat_coords;
    coords["lon"] = field.lon_coords;
    h["coords"] = coords;
    if (field.has_fill) h["fill_value"] = field.fill_value;
    const std::string header = h.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "archive: cannot write " + path);
    out.write(kMagic, 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(header.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    if (dtype == "f32") {
        std::vector<float> raw(field.values.begin(), field.values.end());
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(n * 4));
    } else {
        out.write(reinterpret_cast<const char*>(field.values.data()),
                  static_cast<std::streamsize>(n * 8));
    }
    require(out.good(), "archive: short write to " + path);
}

std::vector<std::string> list_archives(const std::string& dir) {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".gar") out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace dsc
