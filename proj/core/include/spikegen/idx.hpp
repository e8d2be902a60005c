#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spikegen/tensor.hpp"

namespace spikegen {

/// MNIST-family dataset loaded from IDX files; pixels normalized to [0,1].
struct IdxDataset {
  Tensor images;                       // (N,1,H,W)
  std::vector<int> labels;             // empty when no label file given
  std::string images_path, labels_path;

  int count() const { return images.dim(0); }
  int height() const { return images.dim(2); }
  int width() const { return images.dim(3); }

  /// One image as (1,1,H,W).
  Tensor image(int i) const;

  /// Batch [first, first+n) as (n,1,H,W).
  Tensor batch(int first, int n) const;
};

/// Reads big-endian IDX image (magic 0x00000803) and optional label
/// (0x00000801) files. `transpose` flips H/W storage order, as needed for
/// the EMNIST-letters files.
IdxDataset load_idx(const std::string& images_path,
                    const std::optional<std::string>& labels_path = {},
                    bool transpose = false);

/// Serializes images (values in [0,1], quantized by round(v*255)) back to
/// the IDX image format. Inverse of load_idx up to quantization.
void write_idx_images(const std::string& path,
                      const std::vector<uint8_t>& pixels, int n, int h, int w);
void write_idx_labels(const std::string& path,
                      const std::vector<uint8_t>& labels);

/// Raw u8 pixels of a loaded dataset re-quantized for byte-exact rewrite.
std::vector<uint8_t> quantize_u8(const Tensor& images);

}  // namespace spikegen
