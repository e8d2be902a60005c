#include "spikegen/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace spikegen {

namespace {

constexpr char kMagic[8] = {'S', 'G', 'C', 'K', 'P', 'T', '0', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
         (uint32_t(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(params.items.size()));
  for (const auto& [name, t] : params.items) {
    write_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    write_u32(out, static_cast<uint32_t>(t.shape().size()));
    for (int d : t.shape()) write_u32(out, static_cast<uint32_t>(d));
    static_assert(sizeof(float) == 4);
    // f32 payload; this code targets little-endian hosts
    out.write(reinterpret_cast<const char*>(t.data().data()),
              std::streamsize(t.data().size() * 4));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path, ParamStore& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const uint32_t version = read_u32(in, path);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version) + " in " + path);
  const uint32_t count = read_u32(in, path);
  if (count != params.items.size())
    throw std::runtime_error(
        "checkpoint: " + path + " has " + std::to_string(count) +
        " records, model expects " + std::to_string(params.items.size()));
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t nlen = read_u32(in, path);
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    const uint32_t rank = read_u32(in, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<int>(read_u32(in, path));
    Tensor t = params.find(name);
    if (t.shape() != shape)
      throw std::runtime_error("checkpoint: shape mismatch for '" + name +
                               "': file has " + shape_str(shape) +
                               ", model has " + shape_str(t.shape()));
    in.read(reinterpret_cast<char*>(t.data().data()),
            std::streamsize(t.data().size() * 4));
    if (!in) throw std::runtime_error("checkpoint: truncated payload in " + path);
  }
}

}  // namespace spikegen
