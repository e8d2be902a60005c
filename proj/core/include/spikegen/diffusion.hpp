#pragma once

#include <vector>

#include "spikegen/lif.hpp"
#include "spikegen/rng.hpp"
#include "spikegen/tensor.hpp"
#include "spikegen/vqsvae.hpp"

namespace spikegen {

/// Absorption schedule gamma_t = 1/(T_d - t + 1); the cumulative mask
/// marginal after t steps is exactly t/T_d.
struct DiffusionSchedule {
  int t_steps = 16;  // T_d

  float gamma(int t) const;
  double mask_marginal(int t) const {
    return static_cast<double>(t) / t_steps;
  }
};

/// Dense (K+1)x(K+1) forward transition matrix at step t, row-major.
/// Nonzero only on the diagonal and in the last (mask) column; row K is
/// absorbing. Corruption uses the sparse shortcut; this is for checks.
std::vector<float> transition_matrix(int t, const DiffusionSchedule& sched,
                                     int k);

/// Token grid part-way through the forward chain; mask token is K.
struct MaskedGrid {
  std::vector<int> h;
  int n = 0, height = 0, width = 0;
  int t = 0;
  int size() const { return n * height * width; }
};

/// Closed-form corruption: each site masked independently with prob t/T_d.
MaskedGrid forward_corrupt(const TokenGrid& h0, int t,
                           const DiffusionSchedule& sched, int k, Rng& rng);

/// Single forward step t (for chain-vs-shortcut checks); masks each
/// unmasked site with prob gamma_t, never unmasks.
MaskedGrid forward_corrupt_step(const MaskedGrid& prev,
                                const DiffusionSchedule& sched, int k,
                                Rng& rng);

struct SdidConfig {
  int codebook_size = 128;  // K; mask token is K
  int t_diffusion = 16;     // T_d
  int channels = 64;
  int t_steps = 8;          // T_s
  float tau = 2.0f;
  float tau_syn = 2.0f;
  float alpha = 2.0f;
  float v_th = 1.0f;
  float v_reset = 0.0f;
};

/// Spiking denoiser S(h_t, t): token + time embedding, three spiking conv
/// blocks with residual additions on the membrane input currents, mixed
/// SFR/PSP readout projected to K logits per site.
class Sdid {
 public:
  Sdid(const SdidConfig& cfg, Rng& rng);

  /// tokens: (N,H,W) row-major with values in [0,K]; t: one diffusion step
  /// per sample, each in 1..T_d. Returns logits (N,K,H,W) over real tokens.
  Tensor forward(const std::vector<int>& tokens, const std::vector<int>& t,
                 int n, int h, int w) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const SdidConfig& config() const { return cfg_; }

 private:
  SdidConfig cfg_;
  PspParams psp_;
  Tensor token_emb_;  // (K+1, channels)
  Tensor time_emb_;   // (T_d, channels)
  SpikingConv conv1_, conv2_, conv3_;
  Tensor k_mix_;
  Tensor head_w_, head_b_;  // 1x1 conv to K logits
  ParamStore params_;
};

/// Reweighted masked cross-entropy given precomputed logits (N,K,H,W):
/// mean over samples of (T_d / t_n) * mean over that sample's masked sites
/// of -log p(target). Unmasked sites carry zero weight and zero gradient;
/// samples with masked_count 0 contribute 0.
Tensor masked_ce_loss(const Tensor& logits, const TokenGrid& targets,
                      const std::vector<char>& masked,
                      const std::vector<int>& t,
                      const std::vector<int>& masked_count, int t_d);

struct DiffusionLossResult {
  Tensor loss;
  /// Per-sample diffusion steps and masked-site counts actually used.
  std::vector<int> t;
  std::vector<int> masked_count;
};

/// One Monte-Carlo ELBO term: per sample, draw t uniform in 1..T_d, corrupt,
/// and score (T_d/t) * mean cross-entropy of the true tokens at masked
/// sites. If corruption masks nothing it is redrawn once, then skipped.
DiffusionLossResult diffusion_loss(const TokenGrid& h0,
                                   const DiffusionSchedule& sched,
                                   const Sdid& model, Rng& rng);

struct SampleStats {
  std::vector<int> masked_before;  // per step t = T_d..1, pre-reveal count
  std::vector<int> revealed;       // per step, sites revealed
};

/// Iterative unmasking: start fully masked at t = T_d; at each step every
/// still-masked site is revealed with probability 1/t, drawing its token
/// from softmax(logits / temperature). Step t = 1 reveals everything.
TokenGrid sample_tokens(const Sdid& model, const DiffusionSchedule& sched,
                        int n, int height, int width, Rng& rng,
                        float temperature = 1.0f,
                        SampleStats* stats = nullptr);

/// Sampled grids decoded through the stage-1 model into images in [0,1].
Tensor generate_images(const Sdid& model, const DiffusionSchedule& sched,
                       const Vqsvae& vqsvae, int count, int height, int width,
                       Rng& rng, float temperature = 1.0f);

}  // namespace spikegen
