#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikegen/rng.hpp"
#include "spikegen/tensor.hpp"

namespace spikegen {

/// Procedurally rendered digit glyphs (0-9) with random affine jitter, as a
/// stand-in handwritten-digit corpus for self-contained experiments.
/// Returns (count,1,size,size) in [0,1]; labels receives the digit classes.
Tensor synthetic_digits(int count, int size, uint64_t seed,
                        std::vector<int>* labels = nullptr);

/// Renders `count` digits and writes IDX image/label files in the standard
/// MNIST layout (u8 pixels, big-endian headers).
void write_synthetic_digit_dataset(const std::string& images_path,
                                   const std::string& labels_path, int count,
                                   int size, uint64_t seed);

}  // namespace spikegen
