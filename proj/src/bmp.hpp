#pragma once

// Minimal uncompressed BMP support for 8-bit grayscale patch sheets.

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pnnet::detail {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, top row first

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
};

/// Reads 8-bit palettized, 24-bit and 32-bit BI_RGB bitmaps; colour is
/// reduced to luminance. Throws FormatError or IoError.
GrayImage read_bmp(const std::filesystem::path& path);

/// Writes an 8-bit bitmap with an identity grayscale palette.
void write_bmp(const std::filesystem::path& path, const GrayImage& image);

}  // namespace pnnet::detail
