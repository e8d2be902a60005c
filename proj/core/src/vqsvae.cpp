#include "spikegen/vqsvae.hpp"

#include <cmath>
#include <stdexcept>

namespace spikegen {

Tensor sfr(const SpikeTrain& train) {
  if (train.empty()) throw std::invalid_argument("sfr: empty spike train");
  Tensor acc = train[0];
  for (size_t t = 1; t < train.size(); ++t) acc = add(acc, train[t]);
  return mul_scalar(acc, 1.0f / static_cast<float>(train.size()));
}

std::vector<Tensor> psp_traces(const SpikeTrain& train, const PspParams& p) {
  if (train.empty()) throw std::invalid_argument("psp: empty spike train");
  const float a = 1.0f - 1.0f / p.tau_syn;
  const float b = 1.0f / p.tau_syn;
  std::vector<Tensor> traces;
  traces.reserve(train.size());
  Tensor prev;
  for (size_t t = 0; t < train.size(); ++t) {
    Tensor cur = (t == 0) ? mul_scalar(train[0], b)
                          : add(mul_scalar(prev, a), mul_scalar(train[t], b));
    traces.push_back(cur);
    prev = cur;
  }
  return traces;
}

Tensor psp(const SpikeTrain& train, const PspParams& p) {
  return psp_traces(train, p).back();
}

Codebook Codebook::create(int k, int c, Rng& rng) {
  if (k < 2) throw std::invalid_argument("codebook needs K >= 2");
  std::vector<float> d(static_cast<size_t>(k) * c);
  // Entries start spread over the readout's reachable range. SFR/PSP
  // features are nonnegative rates, so a symmetric init around zero would
  // leave most entries unused and the generator stage silent.
  for (auto& v : d) v = rng.uniform(0.0f, 0.3f);
  Codebook cb;
  cb.entries = Tensor::from({k, c}, std::move(d), true);
  cb.k_mix = Tensor::scalar(0.0f, true);  // sigmoid(0) = 0.5
  return cb;
}

Tensor mix_features(const SpikeTrain& train, const Codebook& cb,
                    const PspParams& p) {
  Tensor s = sigmoid(cb.k_mix);
  Tensor one_minus_s = add_scalar(mul_scalar(s, -1.0f), 1.0f);
  return add(scale_by(sfr(train), s), scale_by(psp(train, p), one_minus_s));
}

TokenGrid quantize(const Tensor& z_e, const Codebook& cb) {
  if (z_e.shape().size() != 4 || z_e.dim(1) != cb.c())
    throw std::invalid_argument("quantize: expected (N," +
                                std::to_string(cb.c()) + ",H,W), got " +
                                shape_str(z_e.shape()));
  const int n = z_e.dim(0), c = z_e.dim(1), h = z_e.dim(2), w = z_e.dim(3);
  const int sp = h * w;
  const int k = cb.k();
  const auto& zd = z_e.data();
  const auto& ed = cb.entries.data();
  TokenGrid grid;
  grid.n = n;
  grid.height = h;
  grid.width = w;
  grid.h.resize(static_cast<size_t>(n) * sp);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < sp; ++p) {
      int best = 0;
      float best_d = 0.0f;
      for (int kk = 0; kk < k; ++kk) {
        float d = 0.0f;
        for (int ch = 0; ch < c; ++ch) {
          float diff = zd[(static_cast<size_t>(i) * c + ch) * sp + p] -
                       ed[static_cast<size_t>(kk) * c + ch];
          d += diff * diff;
        }
        if (kk == 0 || d < best_d) {  // strict < keeps the lowest index on ties
          best_d = d;
          best = kk;
        }
      }
      grid.h[static_cast<size_t>(i) * sp + p] = best;
    }
  return grid;
}

Tensor index_codebook(const Codebook& cb, const TokenGrid& grid) {
  return embed_spatial(cb.entries, grid.h, grid.n, grid.height, grid.width);
}

Vqsvae::Vqsvae(const VqsvaeConfig& cfg, Rng& rng) : cfg_(cfg) {
  psp_.tau_syn = cfg.tau_syn;
  LifParams lif{cfg.tau, cfg.v_th, cfg.v_reset, cfg.alpha, true};
  // Gains picked so every layer fires at roughly a 10% rate on digit input
  // at initialization; the transpose decoders see only four taps per input
  // channel of a sparse train and need a far larger scale.
  Rng wr = rng.split(1);
  enc1_ = SpikingConv("enc1", 1, 32, 3, 2, 1, lif, wr, false, 7.5f);
  enc2_ = SpikingConv("enc2", 32, cfg.channels, 3, 2, 1, lif, wr, false, 7.5f);
  cb_ = Codebook::create(cfg.codebook_size, cfg.channels, wr);
  asg_ = SpikingConv("asg", cfg.channels, cfg.channels, 1, 1, 0, lif, wr,
                     false, 7.5f);
  dec1_ = SpikingConv("dec1", cfg.channels, 32, 4, 2, 1, lif, wr, true, 22.0f);
  dec2_ = SpikingConv("dec2", 32, 32, 4, 2, 1, lif, wr, true, 22.0f);
  {
    const float lim = 1.0f / std::sqrt(32.0f);
    std::vector<float> d(32);
    for (auto& v : d) v = wr.uniform(-lim, lim);
    out_w_ = Tensor::from({1, 32, 1, 1}, std::move(d), true);
    // A zero bias plus the [0,1] clamp makes empty regions render as exact
    // black from the start; a mid-gray bias leaves a faint glow that the
    // reconstruction loss is too weak to remove within the epoch budget.
    out_b_ = Tensor::zeros({1}, true);
  }
  enc1_.register_params(params_);
  enc2_.register_params(params_);
  params_.add("codebook.entries", cb_.entries);
  params_.add("codebook.k_mix", cb_.k_mix);
  asg_.register_params(params_);
  dec1_.register_params(params_);
  dec2_.register_params(params_);
  params_.add("out.w", out_w_);
  params_.add("out.b", out_b_);
}

SpikeTrain Vqsvae::run_asg(const Tensor& z_q) const {
  return asg_.run(direct_input_encode(z_q, cfg_.t_steps));
}

SpikeTrain Vqsvae::decode_train(const SpikeTrain& in) const {
  return dec2_.run(dec1_.run(in));
}

Tensor Vqsvae::readout_image(const SpikeTrain& dec_out) const {
  return clamp01(conv2d(sfr(dec_out), out_w_, out_b_, 1, 0));
}

VqsvaeForward Vqsvae::forward(const Tensor& x) const {
  if (x.shape().size() != 4 || x.dim(1) != 1 || x.dim(2) % 4 != 0 ||
      x.dim(3) % 4 != 0)
    throw std::invalid_argument(
        "vqsvae: input must be (N,1,H,W) with H,W divisible by 4, got " +
        shape_str(x.shape()));
  VqsvaeForward f;
  SpikeTrain enc_in = direct_input_encode(x, cfg_.t_steps);
  f.z_e_train = enc2_.run(enc1_.run(enc_in));
  f.z_e = mix_features(f.z_e_train, cb_, psp_);
  f.tokens = quantize(f.z_e, cb_);
  f.z_q = index_codebook(cb_, f.tokens);
  f.z_q_train = run_asg(f.z_q);
  // Straight-through at the spike-train level: the decoder sees the ASG
  // spikes but gradients route back onto the encoder's spike train.
  SpikeTrain dec_in;
  dec_in.reserve(f.z_q_train.size());
  for (size_t t = 0; t < f.z_q_train.size(); ++t)
    dec_in.push_back(straight_through(f.z_q_train[t], f.z_e_train[t]));
  f.x_hat = readout_image(decode_train(dec_in));
  return f;
}

TokenGrid Vqsvae::encode(const Tensor& x) const {
  SpikeTrain enc_in = direct_input_encode(x, cfg_.t_steps);
  SpikeTrain train = enc2_.run(enc1_.run(enc_in));
  return quantize(mix_features(train, cb_, psp_), cb_);
}

Tensor Vqsvae::decode_tokens(const TokenGrid& grid) const {
  Tensor z_q = index_codebook(cb_, grid);
  return readout_image(decode_train(run_asg(z_q)));
}

VqsvaeLossTerms Vqsvae::loss(const Tensor& x, const VqsvaeForward& f) const {
  VqsvaeLossTerms out;
  Tensor recon = mse(x, f.x_hat);
  Tensor codebook_term = mse(f.z_e.detach(), f.z_q);

  SpikeTrain ze_sg, zq_sg;
  for (const auto& t : f.z_e_train) ze_sg.push_back(t.detach());
  for (const auto& t : f.z_q_train) zq_sg.push_back(t.detach());
  auto psp_ze_sg = psp_traces(ze_sg, psp_);
  auto psp_zq = psp_traces(f.z_q_train, psp_);
  auto psp_zq_sg = psp_traces(zq_sg, psp_);
  auto psp_ze = psp_traces(f.z_e_train, psp_);

  Tensor asg_mmd = mse(psp_ze_sg[0], psp_zq[0]);
  Tensor commit_mmd = mse(psp_zq_sg[0], psp_ze[0]);
  for (size_t t = 1; t < psp_ze.size(); ++t) {
    asg_mmd = add(asg_mmd, mse(psp_ze_sg[t], psp_zq[t]));
    commit_mmd = add(commit_mmd, mse(psp_zq_sg[t], psp_ze[t]));
  }

  out.total = add(add(recon, codebook_term),
                  add(asg_mmd, mul_scalar(commit_mmd, cfg_.beta)));
  out.recon = recon.item();
  out.codebook = codebook_term.item();
  out.asg_mmd = asg_mmd.item();
  out.commit_mmd = commit_mmd.item();
  if (!std::isfinite(out.total.item()))
    throw std::runtime_error("vqsvae: non-finite training loss");
  return out;
}

double Vqsvae::perplexity(const TokenGrid& grid, int k) {
  std::vector<double> hist(static_cast<size_t>(k), 0.0);
  for (int t : grid.h) hist[static_cast<size_t>(t)] += 1.0;
  const double n = static_cast<double>(grid.h.size());
  double ent = 0.0;
  for (double c : hist)
    if (c > 0.0) {
      double p = c / n;
      ent -= p * std::log(p);
    }
  return std::exp(ent);
}

}  // namespace spikegen
