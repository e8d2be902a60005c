#pragma once

#include <string>

#include "spikegen/tensor.hpp"

namespace spikegen {

/// Tiles a batch (N,1,H,W) of images in [0,1] into a near-square grid and
/// writes it as an 8-bit binary PGM (P5). Pixels quantize by round(v*255).
void save_image_grid(const Tensor& images, const std::string& path);

/// Reads a binary PGM back; returns (1,1,H,W) in [0,1]. Used by tests.
Tensor load_pgm(const std::string& path);

}  // namespace spikegen
