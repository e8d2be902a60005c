#pragma once

#include <string>

namespace spikegen {

/// Experiment configuration, stored on disk as a flat key=value text file
/// with '#' comments. Unknown keys are rejected.
struct Config {
  std::string dataset_images;
  std::string dataset_labels;
  bool dataset_transpose = false;  // EMNIST-letters storage order

  int subset = 8000;    // images used for training; 0 = all
  int t_steps = 8;      // T_s, SNN simulation horizon
  int t_diffusion = 16; // T_d, diffusion chain length
  int channels = 16;    // C, latent / codebook dimension
  int codebook_size = 128;  // K
  int sdid_channels = 64;

  float tau = 2.0f;
  float tau_syn = 2.0f;
  float alpha = 2.0f;
  float v_th = 1.0f;
  float v_reset = 0.0f;
  float beta = 0.25f;

  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float weight_decay = 1e-3f;
  int batch_size = 64;
  int epochs = 10;
  uint64_t seed = 42;
  float temperature = 1.0f;
  int thread_count = 0;  // 0 = library default

  std::string vqsvae_ckpt = "vqsvae.ckpt";
  std::string sdid_ckpt = "sdid.ckpt";
  std::string out_dir = ".";

  /// Throws with a field-naming message when a value is out of range.
  void validate() const;
};

Config parse_config_file(const std::string& path);
Config parse_config_text(const std::string& text, const std::string& origin);

/// Canonical serialization: every key once, fixed order, no comments.
std::string serialize_config(const Config& cfg);

}  // namespace spikegen
