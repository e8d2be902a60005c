#pragma once

#include "spikegen/tensor.hpp"

namespace spikegen {

/// Mean squared error over all elements; shapes must match.
double metric_mse(const Tensor& x, const Tensor& y);

/// Mean SSIM over a batch (N,1,H,W) in [0,1]. 11x11 Gaussian window with
/// sigma 1.5, C1 = 0.01^2, C2 = 0.03^2, averaged over the valid region.
double metric_ssim(const Tensor& x, const Tensor& y);

/// 1 - SSIM, the orientation used when lower is better.
inline double metric_ssim_loss(const Tensor& x, const Tensor& y) {
  return 1.0 - metric_ssim(x, y);
}

}  // namespace spikegen
