#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spikegen/config.hpp"
#include "spikegen/diffusion.hpp"
#include "spikegen/idx.hpp"
#include "spikegen/vqsvae.hpp"

namespace spikegen {

VqsvaeConfig vqsvae_config_from(const Config& cfg);
SdidConfig sdid_config_from(const Config& cfg);

/// Applies the configured deterministic thread count (no-op when 0).
void apply_thread_count(int thread_count);

/// Keeps large short-lived tensor buffers inside the glibc main arena
/// instead of per-allocation mmap/munmap, which dominates runtime for the
/// unrolled-in-time graphs. No-op on other C libraries.
void tune_allocator();

struct VqsvaeEpoch {
  int epoch = 0;
  double loss = 0, recon = 0, codebook = 0, asg_mmd = 0, commit_mmd = 0;
  double mse = 0, ssim_loss = 0, perplexity = 0;
};

struct SdidEpoch {
  int epoch = 0;
  double train_loss = 0;
  double heldout_loss = 0;
};

std::string vqsvae_csv_header();
std::string vqsvae_csv_row(const VqsvaeEpoch& e);
std::string sdid_csv_header();
std::string sdid_csv_row(const SdidEpoch& e);

/// Stage-1 training over the configured subset. Deterministic for a fixed
/// seed; metrics carry per-epoch loss terms, reconstruction MSE/SSIM and
/// codebook perplexity. `progress` (optional) receives one line per epoch.
std::vector<VqsvaeEpoch> train_vqsvae(const Config& cfg, Vqsvae& model,
                                      const IdxDataset& ds,
                                      std::ostream* progress = nullptr);

/// Stage-2 training on token grids from a frozen stage-1 encoder. The
/// held-out loss is measured on a reserved slice with a fixed corruption
/// stream, including once at epoch 0 before any update.
std::vector<SdidEpoch> train_sdid(const Config& cfg, Sdid& model,
                                  const Vqsvae& vqsvae, const IdxDataset& ds,
                                  std::ostream* progress = nullptr);

/// Indices 0..n-1 shuffled by the given stream (Fisher-Yates).
std::vector<int> shuffled_indices(int n, Rng& rng);

}  // namespace spikegen
