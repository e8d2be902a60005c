#pragma once

#include <string>
#include <vector>

#include "spikegen/lif.hpp"
#include "spikegen/ops.hpp"
#include "spikegen/optim.hpp"
#include "spikegen/rng.hpp"
#include "spikegen/tensor.hpp"

namespace spikegen {

struct PspParams {
  float tau_syn = 2.0f;
};

/// Time-average of a spike train (per element).
Tensor sfr(const SpikeTrain& train);

/// Exponential trace PSP_t = (1 - 1/tau_syn) PSP_{t-1} + (1/tau_syn) z_t,
/// starting from zero. Returns the trace at every step.
std::vector<Tensor> psp_traces(const SpikeTrain& train, const PspParams& p);

/// PSP at the final step only.
Tensor psp(const SpikeTrain& train, const PspParams& p);

/// Token assignments for one batch, row-major (N, H', W') flattened.
struct TokenGrid {
  std::vector<int> h;
  int n = 0, height = 0, width = 0;
  int size() const { return n * height * width; }
};

/// K learnable C-dim entries plus the SFR/PSP mixing weight (pre-sigmoid).
struct Codebook {
  Tensor entries;  // (K, C)
  Tensor k_mix;    // scalar, mixed weight is sigmoid(k_mix)

  static Codebook create(int k, int c, Rng& rng);
  int k() const { return entries.dim(0); }
  int c() const { return entries.dim(1); }
};

/// z_E = sigmoid(k_mix) * SFR + (1 - sigmoid(k_mix)) * PSP_{T_s}.
Tensor mix_features(const SpikeTrain& train, const Codebook& cb,
                    const PspParams& p);

/// Nearest codebook entry per spatial site (L2, ties to the lowest index).
TokenGrid quantize(const Tensor& z_e, const Codebook& cb);

/// Embedding lookup z_Q[:,i,j] = entries[h[i,j]]; rejects out-of-range tokens.
Tensor index_codebook(const Codebook& cb, const TokenGrid& grid);

struct VqsvaeConfig {
  int channels = 16;     // C, latent channels == codebook dim
  int codebook_size = 128;  // K
  int t_steps = 8;       // T_s
  float tau = 2.0f;
  float tau_syn = 2.0f;
  float alpha = 2.0f;
  float v_th = 1.0f;
  float v_reset = 0.0f;
  float beta = 0.25f;    // commitment weight
};

struct VqsvaeForward {
  Tensor x_hat;          // (N,1,H,W), clamped to [0,1]
  Tensor z_e;            // (N,C,H',W')
  Tensor z_q;            // (N,C,H',W')
  TokenGrid tokens;      // h_0
  SpikeTrain z_e_train;  // encoder output spikes
  SpikeTrain z_q_train;  // ASG output spikes
};

struct VqsvaeLossTerms {
  Tensor total;
  float recon = 0, codebook = 0, asg_mmd = 0, commit_mmd = 0;
};

/// Spiking encoder -> SFR/PSP readout -> codebook -> ASG -> spiking decoder.
class Vqsvae {
 public:
  Vqsvae(const VqsvaeConfig& cfg, Rng& rng);

  VqsvaeForward forward(const Tensor& x) const;

  /// Encoder + readout + quantize only (used to tokenize a dataset).
  TokenGrid encode(const Tensor& x) const;

  /// Codebook tokens -> ASG -> decoder -> image.
  Tensor decode_tokens(const TokenGrid& grid) const;

  VqsvaeLossTerms loss(const Tensor& x, const VqsvaeForward& f) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const VqsvaeConfig& config() const { return cfg_; }
  const Codebook& codebook() const { return cb_; }

  /// Fraction-weighted entropy exp of token usage on one batch.
  static double perplexity(const TokenGrid& grid, int k);

 private:
  SpikeTrain decode_train(const SpikeTrain& asg_out) const;
  Tensor readout_image(const SpikeTrain& dec_out) const;
  SpikeTrain run_asg(const Tensor& z_q) const;

  VqsvaeConfig cfg_;
  PspParams psp_;
  SpikingConv enc1_, enc2_;
  Codebook cb_;
  SpikingConv asg_;
  SpikingConv dec1_, dec2_;
  Tensor out_w_, out_b_;  // 1x1 readout conv on decoder SFR
  ParamStore params_;
};

}  // namespace spikegen
