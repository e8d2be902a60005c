#include "spikegen/idx.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace spikegen {

namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
    throw std::runtime_error("idx: truncated header in " + path);
  return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) |
         (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

std::vector<uint8_t> read_payload(std::ifstream& in, size_t expected,
                                  const std::string& path) {
  std::vector<uint8_t> buf(expected);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(expected));
  const size_t got = static_cast<size_t>(in.gcount());
  if (got != expected)
    throw std::runtime_error("idx: truncated payload in " + path +
                             ": expected " + std::to_string(expected) +
                             " bytes, got " + std::to_string(got));
  return buf;
}

}  // namespace

Tensor IdxDataset::image(int i) const { return batch(i, 1); }

Tensor IdxDataset::batch(int first, int n) const {
  if (first < 0 || n < 1 || first + n > count())
    throw std::out_of_range("idx batch [" + std::to_string(first) + "," +
                            std::to_string(first + n) + ") outside dataset of " +
                            std::to_string(count()));
  const int sz = height() * width();
  const auto& d = images.data();
  std::vector<float> out(static_cast<size_t>(n) * sz);
  std::memcpy(out.data(), d.data() + static_cast<size_t>(first) * sz,
              out.size() * sizeof(float));
  return Tensor::from({n, 1, height(), width()}, std::move(out));
}

IdxDataset load_idx(const std::string& images_path,
                    const std::optional<std::string>& labels_path,
                    bool transpose) {
  std::ifstream in(images_path, std::ios::binary);
  if (!in) throw std::runtime_error("idx: cannot open " + images_path);
  const uint32_t magic = read_u32_be(in, images_path);
  if (magic != kImageMagic)
    throw std::runtime_error("idx: bad image magic in " + images_path +
                             " (got 0x" + std::to_string(magic) + ")");
  const uint32_t n = read_u32_be(in, images_path);
  const uint32_t h = read_u32_be(in, images_path);
  const uint32_t w = read_u32_be(in, images_path);
  if (n == 0) throw std::runtime_error("idx: empty dataset in " + images_path);
  auto pixels =
      read_payload(in, static_cast<size_t>(n) * h * w, images_path);

  std::vector<float> data(pixels.size());
  if (!transpose) {
    for (size_t i = 0; i < pixels.size(); ++i)
      data[i] = static_cast<float>(pixels[i]) / 255.0f;
  } else {
    // EMNIST-letters images are stored column-major relative to MNIST.
    const size_t sz = static_cast<size_t>(h) * w;
    for (uint32_t img = 0; img < n; ++img)
      for (uint32_t r = 0; r < h; ++r)
        for (uint32_t c = 0; c < w; ++c)
          data[img * sz + r * w + c] =
              static_cast<float>(pixels[img * sz + c * h + r]) / 255.0f;
  }

  IdxDataset ds;
  ds.images = Tensor::from({static_cast<int>(n), 1, static_cast<int>(h),
                            static_cast<int>(w)},
                           std::move(data));
  ds.images_path = images_path;

  if (labels_path) {
    std::ifstream lin(*labels_path, std::ios::binary);
    if (!lin) throw std::runtime_error("idx: cannot open " + *labels_path);
    const uint32_t lmagic = read_u32_be(lin, *labels_path);
    if (lmagic != kLabelMagic)
      throw std::runtime_error("idx: bad label magic in " + *labels_path);
    const uint32_t ln = read_u32_be(lin, *labels_path);
    if (ln != n)
      throw std::runtime_error(
          "idx: label count " + std::to_string(ln) + " in " + *labels_path +
          " does not match image count " + std::to_string(n));
    auto lraw = read_payload(lin, ln, *labels_path);
    ds.labels.assign(lraw.begin(), lraw.end());
    ds.labels_path = *labels_path;
  }
  return ds;
}

void write_idx_images(const std::string& path,
                      const std::vector<uint8_t>& pixels, int n, int h,
                      int w) {
  if (static_cast<size_t>(n) * h * w != pixels.size())
    throw std::invalid_argument("idx write: pixel count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot write " + path);
  write_u32_be(out, kImageMagic);
  write_u32_be(out, static_cast<uint32_t>(n));
  write_u32_be(out, static_cast<uint32_t>(h));
  write_u32_be(out, static_cast<uint32_t>(w));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            std::streamsize(pixels.size()));
  if (!out) throw std::runtime_error("idx: write failed for " + path);
}

void write_idx_labels(const std::string& path,
                      const std::vector<uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("idx: cannot write " + path);
  write_u32_be(out, kLabelMagic);
  write_u32_be(out, static_cast<uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            std::streamsize(labels.size()));
  if (!out) throw std::runtime_error("idx: write failed for " + path);
}

std::vector<uint8_t> quantize_u8(const Tensor& images) {
  std::vector<uint8_t> out(images.data().size());
  const auto& d = images.data();
  for (size_t i = 0; i < out.size(); ++i) {
    float v = std::round(d[i] * 255.0f);
    out[i] = static_cast<uint8_t>(v < 0.0f ? 0.0f : (v > 255.0f ? 255.0f : v));
  }
  return out;
}

}  // namespace spikegen
