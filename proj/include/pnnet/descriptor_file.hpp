#pragma once

// Binary descriptor file, little-endian:
//   "PNNDESC\0" | u32 version | u64 N | u32 D | u32 checkpoint hash | f32 rows[N][D]

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace pnnet {

inline constexpr std::uint32_t kDescriptorFileVersion = 1;
inline constexpr std::size_t kDescriptorHeaderBytes = 28;

struct DescriptorFile {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::uint32_t checkpoint_hash = 0;  // CRC-32 of the checkpoint that produced the rows
  std::vector<float> values;          // count * dim, row-major

  std::span<const float> row(std::size_t i) const { return std::span<const float>(values).subspan(i * dim, dim); }
  bool operator==(const DescriptorFile&) const = default;
};

/// Throws ShapeError when values.size() != count * dim.
void write_descriptor_file(const std::filesystem::path& path, const DescriptorFile& file);

/// Throws FormatError on a bad magic, unknown version or a byte length other
/// than header + 4*N*D.
DescriptorFile read_descriptor_file(const std::filesystem::path& path);

/// One line per row: index, then the values with 9 significant digits.
void dump_descriptor_file(std::ostream& out, const DescriptorFile& file);

}  // namespace pnnet
