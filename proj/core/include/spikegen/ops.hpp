#pragma once

#include <functional>
#include <vector>

#include "spikegen/tensor.hpp"

namespace spikegen {

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, float c);
Tensor mul_scalar(const Tensor& a, float c);

/// x * s where s is a single-element tensor; gradient flows to both.
Tensor scale_by(const Tensor& x, const Tensor& s);

Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

/// Clamp to [0,1]; gradient passes where the input lies strictly inside.
Tensor clamp01(const Tensor& x);

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// mean((a-b)^2) as a single fused node.
Tensor mse(const Tensor& a, const Tensor& b);

// ---- linear algebra --------------------------------------------------------

/// (m,k) x (k,n) -> (m,n).
Tensor matmul(const Tensor& a, const Tensor& b);

// ---- convolutions ----------------------------------------------------------

/// x: (N,Ci,H,W), w: (Co,Ci,kh,kw), b: (Co) or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad);

/// x: (N,Ci,H,W), w: (Ci,Co,kh,kw), b: (Co) or undefined.
/// Output spatial size: (H-1)*stride - 2*pad + kh.
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride, int pad);

/// x: (N,C,H,W) + b: (C), broadcast over N,H,W.
Tensor add_channel_bias(const Tensor& x, const Tensor& b);

// ---- softmax / categorical -------------------------------------------------

/// Softmax over the last (only) axis of a 1-D tensor.
Tensor softmax(const Tensor& x);

/// Log-softmax over the channel axis of a (N,C,H,W) tensor.
Tensor log_softmax_channels(const Tensor& x);

/// Picks x[n, idx[n,h,w], h, w] from (N,C,H,W) -> (N,H,W).
Tensor gather_channel(const Tensor& x, const std::vector<int>& idx);

/// Rows of table (K,C) selected per spatial site: tokens (N,H,W) row-major,
/// values in [0,K-1] -> (N,C,H,W). Gradient accumulates into table rows.
Tensor embed_spatial(const Tensor& table, const std::vector<int>& tokens, int n,
                     int h, int w);

/// Constant one-hot matrix (len(idx), k); no gradient.
Tensor one_hot(const std::vector<int>& idx, int k);

// ---- custom gradient -------------------------------------------------------

/// Elementwise forward with a hand-registered backward rule. The backward
/// map is evaluated at the forward input; the forward map itself is never
/// differentiated.
struct CustomGradFn {
  std::function<float(float)> forward;
  std::function<float(float)> backward;
};

Tensor apply_custom(const Tensor& x, const CustomGradFn& f);

/// Heaviside step (1 when x >= 0) with arctan-family surrogate backward
/// g'(x) = alpha / (2 * (1 + (pi/2 * alpha * x)^2)).
Tensor spike_surrogate(const Tensor& x, float alpha);
float surrogate_grad(float x, float alpha);

/// Straight-through: value of q, gradient routed to e as identity.
Tensor straight_through(const Tensor& q, const Tensor& e);

// ---- fused neuron kernels --------------------------------------------------
// Equivalent to compositions of the elementwise ops above, fused into single
// graph nodes to keep the unrolled-in-time graph small.

/// Membrane charge h = v + (x - (v - v_reset)) / tau.
Tensor lif_charge(const Tensor& x, const Tensor& v, float tau, float v_reset);

/// Spike s = heaviside(h - v_th) with surrogate backward evaluated at
/// h - v_th.
Tensor lif_fire(const Tensor& h, float v_th, float alpha);

/// Hard reset v' = h (1 - s) + v_reset s. With detach_reset the spike is
/// treated as constant, so no gradient flows into s here.
Tensor lif_reset(const Tensor& h, const Tensor& s, float v_reset,
                 bool detach_reset);

}  // namespace spikegen
