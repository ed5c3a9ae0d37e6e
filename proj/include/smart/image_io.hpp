#pragma once

#include "smart/raster.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace smart {

// 8-bit PNG codec. Encoding is deterministic: fixed compression settings and
// no time or text chunks.

RgbImage read_png_rgb(const std::filesystem::path& path);
RgbaImage read_png_rgba(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RgbImage& image);
std::vector<std::uint8_t> encode_png(const RgbaImage& image);

void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const RgbaImage& image);

}  // namespace smart
