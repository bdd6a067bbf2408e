#include "bmp.hpp"

#include <cmath>

#include "binary_io.hpp"

namespace pnnet::detail {

namespace {

constexpr std::uint32_t kFileHeaderSize = 14;
constexpr std::uint32_t kInfoHeaderSize = 40;

std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>(std::lround(0.299 * r + 0.587 * g + 0.114 * b));
}

}  // namespace

GrayImage read_bmp(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  const std::string what = "bitmap " + path.string();
  ByteReader r(bytes, what);
  if (r.get_chars(2) != "BM") throw FormatError(what + ": not a BMP file");
  r.get_u32();  // file size
  r.get_u32();  // reserved
  const std::uint32_t data_offset = r.get_u32();
  const std::uint32_t info_size = r.get_u32();
  if (info_size < kInfoHeaderSize) throw FormatError(what + ": unsupported header");
  const auto width = static_cast<std::int32_t>(r.get_u32());
  const auto height = static_cast<std::int32_t>(r.get_u32());
  r.get_u8();
  r.get_u8();  // planes
  const std::uint16_t bpp = static_cast<std::uint16_t>(r.get_u8() | (r.get_u8() << 8));
  const std::uint32_t compression = r.get_u32();
  r.get_u32();  // image size
  r.get_u32();
  r.get_u32();  // resolution
  std::uint32_t colors_used = r.get_u32();
  r.get_u32();  // important colours
  if (compression != 0) throw FormatError(what + ": compressed bitmaps are not supported");
  if (width <= 0 || height == 0) throw FormatError(what + ": bad dimensions");
  if (bpp != 8 && bpp != 24 && bpp != 32) {
    throw FormatError(what + ": unsupported bit depth " + std::to_string(bpp));
  }

  std::vector<std::uint8_t> palette(256);
  for (std::size_t i = 0; i < 256; ++i) palette[i] = static_cast<std::uint8_t>(i);
  if (bpp == 8) {
    if (colors_used == 0) colors_used = 256;
    const std::size_t palette_pos = kFileHeaderSize + info_size;
    if (colors_used > 256 || palette_pos + 4 * colors_used > bytes.size()) {
      throw FormatError(what + ": bad palette");
    }
    for (std::size_t i = 0; i < colors_used; ++i) {
      const std::uint8_t* e = bytes.data() + palette_pos + 4 * i;  // B G R 0
      palette[i] = luminance(e[2], e[1], e[0]);
    }
  }

  GrayImage img;
  img.width = static_cast<std::size_t>(width);
  img.height = static_cast<std::size_t>(std::abs(height));
  const bool bottom_up = height > 0;
  const std::size_t bytes_pp = bpp / 8;
  const std::size_t stride = (img.width * bytes_pp + 3) / 4 * 4;
  if (data_offset + stride * img.height > bytes.size()) throw FormatError(what + ": truncated pixel data");
  img.pixels.resize(img.width * img.height);
  for (std::size_t row = 0; row < img.height; ++row) {
    const std::size_t y = bottom_up ? img.height - 1 - row : row;
    const std::uint8_t* src = bytes.data() + data_offset + row * stride;
    std::uint8_t* dst = img.pixels.data() + y * img.width;
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::uint8_t* px = src + x * bytes_pp;
      dst[x] = bpp == 8 ? palette[px[0]] : luminance(px[2], px[1], px[0]);
    }
  }
  return img;
}

void write_bmp(const std::filesystem::path& path, const GrayImage& image) {
  const std::size_t stride = (image.width + 3) / 4 * 4;
  const std::uint32_t data_offset = kFileHeaderSize + kInfoHeaderSize + 256 * 4;
  const std::uint32_t data_size = static_cast<std::uint32_t>(stride * image.height);
  ByteWriter w;
  w.put_chars("BM");
  w.put_u32(data_offset + data_size);
  w.put_u32(0);
  w.put_u32(data_offset);
  w.put_u32(kInfoHeaderSize);
  w.put_u32(static_cast<std::uint32_t>(image.width));
  w.put_u32(static_cast<std::uint32_t>(image.height));
  w.put_u8(1);
  w.put_u8(0);
  w.put_u8(8);
  w.put_u8(0);
  w.put_u32(0);
  w.put_u32(data_size);
  w.put_u32(2835);
  w.put_u32(2835);
  w.put_u32(256);
  w.put_u32(0);
  for (std::uint32_t i = 0; i < 256; ++i) w.put_u32(i | (i << 8) | (i << 16));
  for (std::size_t row = 0; row < image.height; ++row) {
    const std::size_t y = image.height - 1 - row;
    for (std::size_t x = 0; x < image.width; ++x) w.put_u8(image.at(x, y));
    for (std::size_t pad = image.width; pad < stride; ++pad) w.put_u8(0);
  }
  write_file_atomic(path, w.bytes());
}

}  // namespace pnnet::detail
