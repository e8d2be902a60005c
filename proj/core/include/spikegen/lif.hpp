#pragma once

#include <string>
#include <vector>

#include "spikegen/ops.hpp"
#include "spikegen/optim.hpp"
#include "spikegen/rng.hpp"
#include "spikegen/tensor.hpp"

namespace spikegen {

/// A spike train is one binary tensor per simulation step, each shaped like
/// the emitting layer's output (leading batch dimension included).
using SpikeTrain = std::vector<Tensor>;

struct LifParams {
  float tau = 2.0f;
  float v_th = 1.0f;
  float v_reset = 0.0f;
  float alpha = 2.0f;
  /// When set, the (1-S) reset factor is treated as constant in backward,
  /// so the spike gradient is not double counted through the reset path.
  bool detach_reset = true;
};

struct LifStepResult {
  Tensor spike;
  Tensor v;
};

/// One membrane update: charge, fire (surrogate backward), hard reset.
///   H = V + (1/tau) * (x - (V - V_reset))
///   S = heaviside(H - V_th)
///   V' = H * (1 - S) + V_reset * S
LifStepResult lif_step(const Tensor& x_t, const Tensor& v,
                       const LifParams& p,
                       const std::string& layer_name = "lif");

/// The input image repeated at every step as the analog current into the
/// first spiking layer.
SpikeTrain direct_input_encode(const Tensor& x, int t_steps);

/// Conv2d followed by a LIF neuron per output element, unrolled over the
/// input train. State starts at V_reset for every run() call.
///
/// w_gain scales the uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weight init.
/// Layers fed by sparse {0,1} spike trains see a much smaller effective
/// fan-in than the nominal one and need gain well above 1 to cross the unit
/// threshold at the start; silent layers produce no surrogate signal worth
/// following and training stalls on the readout bias alone.
class SpikingConv {
 public:
  SpikingConv() = default;
  SpikingConv(std::string name, int in_ch, int out_ch, int kernel, int stride,
              int pad, const LifParams& lif, Rng& rng, bool transpose = false,
              float w_gain = 1.0f);

  void register_params(ParamStore& store) const;
  SpikeTrain run(const SpikeTrain& input) const;

  /// Synaptic currents only (no LIF); used for residual wiring.
  Tensor current(const Tensor& x_t) const;
  const LifParams& lif() const { return lif_; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Tensor w_, b_;
  int stride_ = 1, pad_ = 0;
  bool transpose_ = false;
  LifParams lif_;
};

/// Fully-connected synapse + LIF; input tensors shaped (N, in).
class SpikingLinear {
 public:
  SpikingLinear() = default;
  SpikingLinear(std::string name, int in_dim, int out_dim,
                const LifParams& lif, Rng& rng);

  void register_params(ParamStore& store) const;
  SpikeTrain run(const SpikeTrain& input) const;

  Tensor weight() const { return w_; }
  Tensor bias() const { return b_; }

 private:
  std::string name_;
  Tensor w_;  // (in, out)
  Tensor b_;  // (out)
  LifParams lif_;
};

/// Runs LIF dynamics over a precomputed sequence of input currents.
SpikeTrain run_lif_over_currents(const std::vector<Tensor>& currents,
                                 const LifParams& p,
                                 const std::string& layer_name);

}  // namespace spikegen
