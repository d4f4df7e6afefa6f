#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dsc {

// Minimal truecolor PNG writer (zlib-deflated, no interlace). rgb is
// row-major top-to-bottom, 3 bytes per pixel.
void write_png(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& rgb);

// Maps a value in [0, 1] onto a compact viridis-like ramp.
void colormap(double t, std::uint8_t* rgb);

}  // namespace dsc
