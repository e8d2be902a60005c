#include "spikegen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "spikegen/metrics.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace spikegen {

VqsvaeConfig vqsvae_config_from(const Config& cfg) {
  VqsvaeConfig m;
  m.channels = cfg.channels;
  m.codebook_size = cfg.codebook_size;
  m.t_steps = cfg.t_steps;
  m.tau = cfg.tau;
  m.tau_syn = cfg.tau_syn;
  m.alpha = cfg.alpha;
  m.v_th = cfg.v_th;
  m.v_reset = cfg.v_reset;
  m.beta = cfg.beta;
  return m;
}

SdidConfig sdid_config_from(const Config& cfg) {
  SdidConfig m;
  m.codebook_size = cfg.codebook_size;
  m.t_diffusion = cfg.t_diffusion;
  m.channels = cfg.sdid_channels;
  m.t_steps = cfg.t_steps;
  m.tau = cfg.tau;
  m.tau_syn = cfg.tau_syn;
  m.alpha = cfg.alpha;
  m.v_th = cfg.v_th;
  m.v_reset = cfg.v_reset;
  return m;
}

void apply_thread_count(int thread_count) {
#ifdef _OPENMP
  if (thread_count > 0) omp_set_num_threads(thread_count);
#else
  (void)thread_count;
#endif
}

void tune_allocator() {
#ifdef __GLIBC__
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(idx[static_cast<size_t>(i)],
              idx[static_cast<size_t>(rng.uniform_int(i + 1))]);
  return idx;
}

namespace {

Tensor gather_batch(const IdxDataset& ds, const std::vector<int>& order,
                    int first, int count) {
  const int sz = ds.height() * ds.width();
  std::vector<float> out(static_cast<size_t>(count) * sz);
  const auto& d = ds.images.data();
  for (int i = 0; i < count; ++i) {
    const int src = order[static_cast<size_t>(first + i)];
    std::copy_n(d.data() + static_cast<size_t>(src) * sz, sz,
                out.data() + static_cast<size_t>(i) * sz);
  }
  return Tensor::from({count, 1, ds.height(), ds.width()}, std::move(out));
}

int train_count(const Config& cfg, const IdxDataset& ds) {
  return (cfg.subset > 0) ? std::min(cfg.subset, ds.count()) : ds.count();
}

AdamWOptions adamw_options(const Config& cfg) {
  AdamWOptions o;
  o.lr = cfg.lr;
  o.beta1 = cfg.beta1;
  o.beta2 = cfg.beta2;
  o.weight_decay = cfg.weight_decay;
  return o;
}

TokenGrid slice_grids(const std::vector<int>& all_tokens, int sp, int height,
                      int width, const std::vector<int>& order, int first,
                      int count) {
  TokenGrid g;
  g.n = count;
  g.height = height;
  g.width = width;
  g.h.resize(static_cast<size_t>(count) * sp);
  for (int i = 0; i < count; ++i) {
    const int src = order[static_cast<size_t>(first + i)];
    std::copy_n(all_tokens.data() + static_cast<size_t>(src) * sp, sp,
                g.h.data() + static_cast<size_t>(i) * sp);
  }
  return g;
}

}  // namespace

std::string vqsvae_csv_header() {
  return "epoch,loss,recon,codebook,asg_mmd,commit_mmd,mse,ssim_loss,"
         "perplexity";
}

std::string vqsvae_csv_row(const VqsvaeEpoch& e) {
  std::ostringstream os;
  os << e.epoch << "," << e.loss << "," << e.recon << "," << e.codebook << ","
     << e.asg_mmd << "," << e.commit_mmd << "," << e.mse << "," << e.ssim_loss
     << "," << e.perplexity;
  return os.str();
}

std::string sdid_csv_header() { return "epoch,train_loss,heldout_loss"; }

std::string sdid_csv_row(const SdidEpoch& e) {
  std::ostringstream os;
  os << e.epoch << "," << e.train_loss << "," << e.heldout_loss;
  return os.str();
}

std::vector<VqsvaeEpoch> train_vqsvae(const Config& cfg, Vqsvae& model,
                                      const IdxDataset& ds,
                                      std::ostream* progress) {
  cfg.validate();
  apply_thread_count(cfg.thread_count);
  const int n = train_count(cfg, ds);
  Rng rng(cfg.seed, 100);
  AdamW opt(adamw_options(cfg));
  std::vector<VqsvaeEpoch> history;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng order_rng = rng.split(static_cast<uint64_t>(epoch));
    const auto order = shuffled_indices(n, order_rng);
    VqsvaeEpoch em;
    em.epoch = epoch;
    std::vector<double> token_hist(static_cast<size_t>(cfg.codebook_size), 0.0);
    double ssim_acc = 0.0;
    double mse_acc = 0.0;
    int batches = 0;
    for (int first = 0; first < n; first += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - first);
      Tensor x = gather_batch(ds, order, first, bs);
      try {
        VqsvaeForward f = model.forward(x);
        VqsvaeLossTerms lt = model.loss(x, f);
        model.params().zero_grad();
        lt.total.backward();
        opt.step(model.params());
        em.loss += lt.total.item();
        em.recon += lt.recon;
        em.codebook += lt.codebook;
        em.asg_mmd += lt.asg_mmd;
        em.commit_mmd += lt.commit_mmd;
        mse_acc += metric_mse(x, f.x_hat) * bs;
        ssim_acc += metric_ssim(x, f.x_hat) * bs;
        for (int t : f.tokens.h) token_hist[static_cast<size_t>(t)] += 1.0;
      } catch (const std::exception& e) {
        throw std::runtime_error("stage-1 training aborted at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batches) + ": " + e.what());
      }
      ++batches;
    }
    em.loss /= batches;
    em.recon /= batches;
    em.codebook /= batches;
    em.asg_mmd /= batches;
    em.commit_mmd /= batches;
    em.mse = mse_acc / n;
    em.ssim_loss = 1.0 - ssim_acc / n;
    double total = 0.0, ent = 0.0;
    for (double c : token_hist) total += c;
    for (double c : token_hist)
      if (c > 0.0) ent -= (c / total) * std::log(c / total);
    em.perplexity = std::exp(ent);
    history.push_back(em);
    if (progress)
      *progress << vqsvae_csv_row(em) << "\n" << std::flush;
  }
  return history;
}

std::vector<SdidEpoch> train_sdid(const Config& cfg, Sdid& model,
                                  const Vqsvae& vqsvae, const IdxDataset& ds,
                                  std::ostream* progress) {
  cfg.validate();
  apply_thread_count(cfg.thread_count);
  if (vqsvae.config().codebook_size != model.config().codebook_size)
    throw std::invalid_argument(
        "stage mismatch: stage-1 K=" +
        std::to_string(vqsvae.config().codebook_size) + " vs stage-2 K=" +
        std::to_string(model.config().codebook_size));
  const int n = train_count(cfg, ds);
  const int sp_h = ds.height() / 4, sp_w = ds.width() / 4;
  const int sp = sp_h * sp_w;

  // Tokenize the whole training slice once; the encoder is frozen so the
  // grids never change between epochs.
  std::vector<int> all_tokens(static_cast<size_t>(n) * sp);
  {
    std::vector<int> ident(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ident[static_cast<size_t>(i)] = i;
    for (int first = 0; first < n; first += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - first);
      TokenGrid g = vqsvae.encode(gather_batch(ds, ident, first, bs));
      std::copy(g.h.begin(), g.h.end(),
                all_tokens.begin() + static_cast<size_t>(first) * sp);
    }
  }

  // Reserve the tail as a held-out slice scored with a fixed corruption
  // stream, so epoch-over-epoch comparisons see identical noise.
  const int heldout = std::max(1, std::min(n / 10, 256));
  const int train_n = std::max(1, n - heldout);
  DiffusionSchedule sched{cfg.t_diffusion};
  std::vector<int> ident(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) ident[static_cast<size_t>(i)] = i;

  auto heldout_loss = [&]() {
    Rng hrng(cfg.seed, 7777);
    double acc = 0.0;
    int batches = 0;
    for (int first = train_n; first < n; first += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - first);
      TokenGrid g = slice_grids(all_tokens, sp, sp_h, sp_w, ident, first, bs);
      acc += diffusion_loss(g, sched, model, hrng).loss.item();
      ++batches;
    }
    return acc / std::max(1, batches);
  };

  Rng rng(cfg.seed, 200);
  AdamW opt(adamw_options(cfg));
  std::vector<SdidEpoch> history;
  {
    SdidEpoch e0;
    e0.epoch = 0;
    e0.heldout_loss = heldout_loss();
    history.push_back(e0);
    if (progress) *progress << sdid_csv_row(e0) << "\n" << std::flush;
  }
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng order_rng = rng.split(static_cast<uint64_t>(epoch));
    auto order = shuffled_indices(train_n, order_rng);
    Rng noise = rng.split(1000 + static_cast<uint64_t>(epoch));
    SdidEpoch em;
    em.epoch = epoch;
    int batches = 0;
    for (int first = 0; first < train_n; first += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, train_n - first);
      TokenGrid g = slice_grids(all_tokens, sp, sp_h, sp_w, order, first, bs);
      try {
        DiffusionLossResult r = diffusion_loss(g, sched, model, noise);
        model.params().zero_grad();
        r.loss.backward();
        opt.step(model.params());
        em.train_loss += r.loss.item();
      } catch (const std::exception& e) {
        throw std::runtime_error("stage-2 training aborted at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batches) + ": " + e.what());
      }
      ++batches;
    }
    em.train_loss /= batches;
    em.heldout_loss = heldout_loss();
    history.push_back(em);
    if (progress) *progress << sdid_csv_row(em) << "\n" << std::flush;
  }
  return history;
}

}  // namespace spikegen
