#include "spikegen/image_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace spikegen {

void save_image_grid(const Tensor& images, const std::string& path) {
  if (images.shape().size() != 4 || images.dim(1) != 1)
    throw std::invalid_argument("save_image_grid: expects (N,1,H,W), got " +
                                shape_str(images.shape()));
  const int n = images.dim(0), h = images.dim(2), w = images.dim(3);
  int cols = 1;
  while (cols * cols < n) ++cols;
  const int rows = (n + cols - 1) / cols;
  const int gh = rows * h, gw = cols * w;
  std::vector<uint8_t> pix(static_cast<size_t>(gh) * gw, 0);
  const auto& d = images.data();
  for (int i = 0; i < n; ++i) {
    const int r0 = (i / cols) * h, c0 = (i % cols) * w;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        float v = std::round(d[(static_cast<size_t>(i) * h + r) * w + c] *
                             255.0f);
        pix[static_cast<size_t>(r0 + r) * gw + c0 + c] =
            static_cast<uint8_t>(v < 0 ? 0 : (v > 255 ? 255 : v));
      }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image " + path);
  out << "P5\n" << gw << " " << gh << "\n255\n";
  out.write(reinterpret_cast<const char*>(pix.data()),
            std::streamsize(pix.size()));
  if (!out) throw std::runtime_error("write failed for image " + path);
}

Tensor load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image " + path);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  if (magic != "P5" || maxv != 255 || w <= 0 || h <= 0)
    throw std::runtime_error("unsupported PGM file: " + path);
  in.get();  // single whitespace after header
  std::vector<uint8_t> pix(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(pix.data()), std::streamsize(pix.size()));
  if (!in) throw std::runtime_error("truncated PGM file: " + path);
  std::vector<float> d(pix.size());
  for (size_t i = 0; i < pix.size(); ++i)
    d[i] = static_cast<float>(pix[i]) / 255.0f;
  return Tensor::from({1, 1, h, w}, std::move(d));
}

}  // namespace spikegen
