#include "pnnet/descriptor_file.hpp"

#include <cstdio>
#include <ostream>

#include "binary_io.hpp"
#include "pnnet/error.hpp"

namespace pnnet {

namespace {
constexpr std::string_view kMagic{"PNNDESC\0", 8};
}

void write_descriptor_file(const std::filesystem::path& path, const DescriptorFile& file) {
  if (file.values.size() != file.count * file.dim) {
    throw ShapeError("write_descriptor_file", "holds " + std::to_string(file.values.size()) + " values, expected " +
                                 std::to_string(file.count) + " x " + std::to_string(file.dim));
  }
  detail::ByteWriter w;
  w.put_chars(kMagic);
  w.put_u32(kDescriptorFileVersion);
  w.put_u64(file.count);
  w.put_u32(static_cast<std::uint32_t>(file.dim));
  w.put_u32(file.checkpoint_hash);
  w.put_f32s(file.values);
  detail::write_file_atomic(path, w.bytes());
}

DescriptorFile read_descriptor_file(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file(path);
  const std::string what = path.string();
  detail::ByteReader r(bytes, what);
  if (r.get_chars(kMagic.size()) != kMagic) throw FormatError(what + ": not a descriptor file (bad magic)");
  const std::uint32_t version = r.get_u32();
  if (version != kDescriptorFileVersion) {
    throw FormatError(what + ": unsupported descriptor file version " + std::to_string(version));
  }
  DescriptorFile file;
  const std::uint64_t count = r.get_u64();
  file.dim = r.get_u32();
  file.checkpoint_hash = r.get_u32();
  if (file.dim == 0 && count != 0) throw FormatError(what + ": zero descriptor dimension");
  if (file.dim != 0 && (r.remaining() % (4 * file.dim) != 0 || r.remaining() / (4 * file.dim) != count)) {
    throw FormatError(what + ": length does not match " + std::to_string(count) + " rows of dimension " +
                      std::to_string(file.dim));
  }
  if (file.dim == 0 && r.remaining() != 0) throw FormatError(what + ": trailing bytes");
  file.count = static_cast<std::size_t>(count);
  file.values.resize(file.count * file.dim);
  r.get_f32s(file.values);
  return file;
}

void dump_descriptor_file(std::ostream& out, const DescriptorFile& file) {
  char buf[32];
  out << "# count " << file.count << " dim " << file.dim << " checkpoint " << std::hex << file.checkpoint_hash
      << std::dec << '\n';
  for (std::size_t i = 0; i < file.count; ++i) {
    out << i;
    for (float v : file.row(i)) {
      std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(v));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace pnnet
