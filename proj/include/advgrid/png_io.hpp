#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "advgrid/image.hpp"

namespace advgrid {

// 8-bit grayscale PNG codec. Colour inputs are converted to luma on decode.
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> bytes);

Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

/// Reads only the header. Returns {width, height}.
std::pair<int, int> png_dimensions(const std::filesystem::path& path);

} // namespace advgrid
