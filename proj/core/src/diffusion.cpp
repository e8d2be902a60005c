#include "spikegen/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace spikegen {

float DiffusionSchedule::gamma(int t) const {
  if (t < 1 || t > t_steps)
    throw std::out_of_range("diffusion step " + std::to_string(t) +
                            " outside 1.." + std::to_string(t_steps));
  return 1.0f / static_cast<float>(t_steps - t + 1);
}

std::vector<float> transition_matrix(int t, const DiffusionSchedule& sched,
                                     int k) {
  const float g = sched.gamma(t);
  const int dim = k + 1;
  std::vector<float> q(static_cast<size_t>(dim) * dim, 0.0f);
  for (int i = 0; i < k; ++i) {
    q[static_cast<size_t>(i) * dim + i] = 1.0f - g;
    q[static_cast<size_t>(i) * dim + k] = g;
  }
  q[static_cast<size_t>(k) * dim + k] = 1.0f;
  return q;
}

MaskedGrid forward_corrupt(const TokenGrid& h0, int t,
                           const DiffusionSchedule& sched, int k, Rng& rng) {
  if (t < 0 || t > sched.t_steps)
    throw std::out_of_range("forward_corrupt: step " + std::to_string(t) +
                            " outside 0.." + std::to_string(sched.t_steps));
  MaskedGrid out;
  out.n = h0.n;
  out.height = h0.height;
  out.width = h0.width;
  out.t = t;
  out.h = h0.h;
  for (int tok : h0.h)
    if (tok < 0 || tok >= k)
      throw std::invalid_argument("forward_corrupt: token " +
                                  std::to_string(tok) + " outside [0," +
                                  std::to_string(k - 1) + "]");
  const double p = sched.mask_marginal(t);
  for (auto& tok : out.h)
    if (rng.bernoulli(p)) tok = k;
  return out;
}

MaskedGrid forward_corrupt_step(const MaskedGrid& prev,
                                const DiffusionSchedule& sched, int k,
                                Rng& rng) {
  MaskedGrid out = prev;
  out.t = prev.t + 1;
  const double g = sched.gamma(out.t);
  for (auto& tok : out.h)
    if (tok != k && rng.bernoulli(g)) tok = k;
  return out;
}

Sdid::Sdid(const SdidConfig& cfg, Rng& rng) : cfg_(cfg) {
  psp_.tau_syn = cfg.tau_syn;
  LifParams lif{cfg.tau, cfg.v_th, cfg.v_reset, cfg.alpha, true};
  Rng wr = rng.split(2);
  const int e = cfg.channels;
  auto init = [&wr](Shape s, int fan_in) {
    const float lim = 1.0f / std::sqrt(static_cast<float>(fan_in));
    std::vector<float> d(static_cast<size_t>(numel(s)));
    for (auto& v : d) v = wr.uniform(-lim, lim);
    return Tensor::from(std::move(s), std::move(d), true);
  };
  token_emb_ = init({cfg.codebook_size + 1, e}, e);
  time_emb_ = init({cfg.t_diffusion, e}, e);
  conv1_ = SpikingConv("sdid.conv1", e, e, 3, 1, 1, lif, wr);
  conv2_ = SpikingConv("sdid.conv2", e, e, 3, 1, 1, lif, wr);
  conv3_ = SpikingConv("sdid.conv3", e, e, 3, 1, 1, lif, wr);
  k_mix_ = Tensor::scalar(0.0f, true);
  head_w_ = init({cfg.codebook_size, e, 1, 1}, e);
  head_b_ = Tensor::zeros({cfg.codebook_size}, true);
  params_.add("sdid.token_emb", token_emb_);
  params_.add("sdid.time_emb", time_emb_);
  conv1_.register_params(params_);
  conv2_.register_params(params_);
  conv3_.register_params(params_);
  params_.add("sdid.k_mix", k_mix_);
  params_.add("sdid.head_w", head_w_);
  params_.add("sdid.head_b", head_b_);
}

Tensor Sdid::forward(const std::vector<int>& tokens, const std::vector<int>& t,
                     int n, int h, int w) const {
  if (static_cast<int>(t.size()) != n)
    throw std::invalid_argument("sdid: need one diffusion step per sample");
  for (int ti : t)
    if (ti < 1 || ti > cfg_.t_diffusion)
      throw std::out_of_range("sdid: diffusion step " + std::to_string(ti) +
                              " outside 1.." + std::to_string(cfg_.t_diffusion));
  const int sp = h * w;
  // Broadcast each sample's time-embedding row to every site.
  std::vector<int> t_sites(static_cast<size_t>(n) * sp);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < sp; ++p)
      t_sites[static_cast<size_t>(i) * sp + p] = t[static_cast<size_t>(i)] - 1;
  Tensor emb = add(embed_spatial(token_emb_, tokens, n, h, w),
                   embed_spatial(time_emb_, t_sites, n, h, w));

  // The analog embedding drives every simulation step; its synaptic current
  // is step-invariant, so compute it once and let only the LIF state evolve.
  const LifParams& lif = conv1_.lif();
  Tensor cur1 = conv1_.current(emb);
  SpikeTrain s1 = run_lif_over_currents(
      std::vector<Tensor>(static_cast<size_t>(cfg_.t_steps), cur1), lif,
      "sdid.conv1");
  std::vector<Tensor> cur2(s1.size()), cur3(s1.size());
  for (size_t i = 0; i < s1.size(); ++i)
    cur2[i] = add(conv2_.current(s1[i]), cur1);  // residual on membrane input
  SpikeTrain s2 = run_lif_over_currents(cur2, lif, "sdid.conv2");
  for (size_t i = 0; i < s2.size(); ++i)
    cur3[i] = add(conv3_.current(s2[i]), cur2[i]);
  SpikeTrain s3 = run_lif_over_currents(cur3, lif, "sdid.conv3");

  Tensor s = sigmoid(k_mix_);
  Tensor one_minus_s = add_scalar(mul_scalar(s, -1.0f), 1.0f);
  Tensor mix =
      add(scale_by(sfr(s3), s), scale_by(psp(s3, psp_), one_minus_s));
  return conv2d(mix, head_w_, head_b_, 1, 0);
}

DiffusionLossResult diffusion_loss(const TokenGrid& h0,
                                   const DiffusionSchedule& sched,
                                   const Sdid& model, Rng& rng) {
  const int k = model.config().codebook_size;
  const int n = h0.n, sp = h0.height * h0.width;
  DiffusionLossResult res;
  res.t.resize(static_cast<size_t>(n));
  res.masked_count.assign(static_cast<size_t>(n), 0);
  std::vector<int> corrupted(h0.h.size());
  std::vector<char> masked(h0.h.size(), 0);
  for (int i = 0; i < n; ++i) {
    const int t = 1 + rng.uniform_int(sched.t_steps);
    res.t[static_cast<size_t>(i)] = t;
    const double p = sched.mask_marginal(t);
    for (int attempt = 0; attempt < 2; ++attempt) {
      int count = 0;
      for (int j = 0; j < sp; ++j) {
        const size_t idx = static_cast<size_t>(i) * sp + j;
        bool m = rng.bernoulli(p);
        masked[idx] = m ? 1 : 0;
        corrupted[idx] = m ? k : h0.h[idx];
        if (m) ++count;
      }
      res.masked_count[static_cast<size_t>(i)] = count;
      if (count > 0) break;  // else redraw the corruption once
    }
  }
  Tensor logits = model.forward(corrupted, res.t, n, h0.height, h0.width);
  res.loss =
      masked_ce_loss(logits, h0, masked, res.t, res.masked_count, sched.t_steps);
  return res;
}

Tensor masked_ce_loss(const Tensor& logits, const TokenGrid& targets,
                      const std::vector<char>& masked,
                      const std::vector<int>& t,
                      const std::vector<int>& masked_count, int t_d) {
  const int n = targets.n, sp = targets.height * targets.width;
  Tensor picked = gather_channel(log_softmax_channels(logits), targets.h);
  // Weights fold in the 1/t reweighting (as T_d/t with uniform t), the
  // per-sample masked-site mean, and the batch mean. Unmasked sites get
  // weight zero, so no gradient reaches them.
  std::vector<float> wts(targets.h.size(), 0.0f);
  for (int i = 0; i < n; ++i) {
    const int cnt = masked_count[static_cast<size_t>(i)];
    if (cnt == 0) continue;
    const float w = static_cast<float>(t_d) /
                    (static_cast<float>(t[static_cast<size_t>(i)]) *
                     static_cast<float>(cnt) * static_cast<float>(n));
    for (int j = 0; j < sp; ++j) {
      const size_t idx = static_cast<size_t>(i) * sp + j;
      if (masked[idx]) wts[idx] = w;
    }
  }
  Tensor wt = Tensor::from({n, targets.height, targets.width}, std::move(wts));
  return mul_scalar(sum(mul(picked, wt)), -1.0f);
}

TokenGrid sample_tokens(const Sdid& model, const DiffusionSchedule& sched,
                        int n, int height, int width, Rng& rng,
                        float temperature, SampleStats* stats) {
  if (temperature <= 0.0f)
    throw std::invalid_argument("sample_tokens: temperature must be > 0");
  const int k = model.config().codebook_size;
  const int sp = height * width;
  TokenGrid grid;
  grid.n = n;
  grid.height = height;
  grid.width = width;
  grid.h.assign(static_cast<size_t>(n) * sp, k);  // fully masked
  std::vector<int> t_vec(static_cast<size_t>(n));
  std::vector<float> probs(static_cast<size_t>(k));
  for (int t = sched.t_steps; t >= 1; --t) {
    int masked_before = 0;
    for (int tok : grid.h)
      if (tok == k) ++masked_before;
    if (stats) stats->masked_before.push_back(masked_before);
    if (masked_before == 0) {
      if (stats) stats->revealed.push_back(0);
      continue;
    }
    std::fill(t_vec.begin(), t_vec.end(), t);
    Tensor logits = model.forward(grid.h, t_vec, n, height, width);
    const auto& ld = logits.data();
    const double reveal_p = 1.0 / static_cast<double>(t);
    int revealed = 0;
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < sp; ++p) {
        const size_t idx = static_cast<size_t>(i) * sp + p;
        if (grid.h[idx] != k) continue;
        if (!rng.bernoulli(reveal_p)) continue;
        // categorical draw from softmax(logits / temperature) at this site
        float mx = -1e30f;
        for (int c = 0; c < k; ++c)
          mx = std::max(mx, ld[(static_cast<size_t>(i) * k + c) * sp + p]);
        double z = 0.0;
        for (int c = 0; c < k; ++c) {
          probs[static_cast<size_t>(c)] = std::exp(
              (ld[(static_cast<size_t>(i) * k + c) * sp + p] - mx) /
              temperature);
          z += probs[static_cast<size_t>(c)];
        }
        double u = rng.uniform() * z;
        int chosen = k - 1;
        double acc = 0.0;
        for (int c = 0; c < k; ++c) {
          acc += probs[static_cast<size_t>(c)];
          if (u < acc) {
            chosen = c;
            break;
          }
        }
        grid.h[idx] = chosen;
        ++revealed;
      }
    if (stats) stats->revealed.push_back(revealed);
  }
  return grid;
}

Tensor generate_images(const Sdid& model, const DiffusionSchedule& sched,
                       const Vqsvae& vqsvae, int count, int height, int width,
                       Rng& rng, float temperature) {
  TokenGrid grid =
      sample_tokens(model, sched, count, height, width, rng, temperature);
  return vqsvae.decode_tokens(grid);
}

}  // namespace spikegen
