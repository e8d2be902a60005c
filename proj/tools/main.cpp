// Command-line driver: stage-1/stage-2 training, reconstruction, sampling
// and evaluation for the spiking discrete-diffusion image pipeline.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spikegen/checkpoint.hpp"
#include "spikegen/config.hpp"
#include "spikegen/diffusion.hpp"
#include "spikegen/idx.hpp"
#include "spikegen/image_io.hpp"
#include "spikegen/metrics.hpp"
#include "spikegen/trainer.hpp"
#include "spikegen/vqsvae.hpp"

namespace fs = std::filesystem;
using namespace spikegen;

namespace {

IdxDataset load_dataset(const Config& cfg) {
  std::optional<std::string> labels;
  if (!cfg.dataset_labels.empty()) labels = cfg.dataset_labels;
  return load_idx(cfg.dataset_images, labels, cfg.dataset_transpose);
}

Vqsvae make_vqsvae(const Config& cfg) {
  Rng rng(cfg.seed);
  return Vqsvae(vqsvae_config_from(cfg), rng);
}

Sdid make_sdid(const Config& cfg) {
  Rng rng(cfg.seed);
  return Sdid(sdid_config_from(cfg), rng);
}

std::string out_path(const Config& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

int cmd_train_vqsvae(const Config& cfg) {
  cfg.validate();
  IdxDataset ds = load_dataset(cfg);
  Vqsvae model = make_vqsvae(cfg);
  std::ofstream csv(out_path(cfg, "vqsvae_metrics.csv"));
  csv << vqsvae_csv_header() << "\n";
  auto history = train_vqsvae(cfg, model, ds, &std::cout);
  for (const auto& e : history) csv << vqsvae_csv_row(e) << "\n";
  save_checkpoint(cfg.vqsvae_ckpt, model.params());
  std::cout << "checkpoint=" << cfg.vqsvae_ckpt << "\n";
  return 0;
}

int cmd_train_sdid(const Config& cfg, const std::string& vqsvae_ckpt) {
  cfg.validate();
  IdxDataset ds = load_dataset(cfg);
  Vqsvae vq = make_vqsvae(cfg);
  load_checkpoint(vqsvae_ckpt, vq.params());
  Sdid model = make_sdid(cfg);
  std::ofstream csv(out_path(cfg, "sdid_metrics.csv"));
  csv << sdid_csv_header() << "\n";
  auto history = train_sdid(cfg, model, vq, ds, &std::cout);
  for (const auto& e : history) csv << sdid_csv_row(e) << "\n";
  save_checkpoint(cfg.sdid_ckpt, model.params());
  std::cout << "checkpoint=" << cfg.sdid_ckpt << "\n";
  return 0;
}

int cmd_reconstruct(const Config& cfg, int n) {
  cfg.validate();
  apply_thread_count(cfg.thread_count);
  IdxDataset ds = load_dataset(cfg);
  Vqsvae vq = make_vqsvae(cfg);
  load_checkpoint(cfg.vqsvae_ckpt, vq.params());
  n = std::min(n, ds.count());
  Tensor x = ds.batch(0, n);
  VqsvaeForward f = vq.forward(x);
  save_image_grid(x, out_path(cfg, "reconstruct_input.pgm"));
  save_image_grid(f.x_hat, out_path(cfg, "reconstruct_output.pgm"));
  std::cout << "mse=" << metric_mse(x, f.x_hat) << "\n"
            << "ssim_loss=" << metric_ssim_loss(x, f.x_hat) << "\n";
  return 0;
}

int cmd_sample(const Config& cfg, int n) {
  cfg.validate();
  apply_thread_count(cfg.thread_count);
  IdxDataset ds = load_dataset(cfg);
  Vqsvae vq = make_vqsvae(cfg);
  load_checkpoint(cfg.vqsvae_ckpt, vq.params());
  Sdid sdid = make_sdid(cfg);
  load_checkpoint(cfg.sdid_ckpt, sdid.params());
  DiffusionSchedule sched{cfg.t_diffusion};
  Rng rng(cfg.seed, 9000);
  Tensor images = generate_images(sdid, sched, vq, n, ds.height() / 4,
                                  ds.width() / 4, rng, cfg.temperature);
  const std::string path = out_path(cfg, "samples.pgm");
  save_image_grid(images, path);
  std::cout << "samples=" << path << "\n";
  return 0;
}

int cmd_eval(const Config& cfg, int n) {
  cfg.validate();
  apply_thread_count(cfg.thread_count);
  IdxDataset ds = load_dataset(cfg);
  Vqsvae vq = make_vqsvae(cfg);
  load_checkpoint(cfg.vqsvae_ckpt, vq.params());
  if (n <= 0) n = std::min(cfg.subset > 0 ? cfg.subset : ds.count(),
                           ds.count());
  n = std::min(n, ds.count());
  double mse_acc = 0.0, ssim_acc = 0.0;
  std::vector<double> hist(static_cast<size_t>(cfg.codebook_size), 0.0);
  for (int first = 0; first < n; first += cfg.batch_size) {
    const int bs = std::min(cfg.batch_size, n - first);
    Tensor x = ds.batch(first, bs);
    VqsvaeForward f = vq.forward(x);
    mse_acc += metric_mse(x, f.x_hat) * bs;
    ssim_acc += metric_ssim(x, f.x_hat) * bs;
    for (int t : f.tokens.h) hist[static_cast<size_t>(t)] += 1.0;
  }
  double total = 0.0, ent = 0.0;
  for (double c : hist) total += c;
  for (double c : hist)
    if (c > 0.0) ent -= (c / total) * std::log(c / total);
  std::cout << "images=" << n << "\n"
            << "mse=" << mse_acc / n << "\n"
            << "ssim_loss=" << 1.0 - ssim_acc / n << "\n"
            << "perplexity=" << std::exp(ent) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spikegen::tune_allocator();
  CLI::App app{"Spiking vector-quantized autoencoder + absorbing-state "
               "discrete diffusion for small grayscale image generation"};
  app.require_subcommand(1);

  std::string config_path, vqsvae_override;
  int n_images = 16;
  std::string out_override;

  auto add_common = [&](CLI::App* sub, bool with_n) {
    sub->add_option("--config", config_path, "key=value config file")
        ->required();
    if (with_n) {
      sub->add_option("--n", n_images, "number of images");
      sub->add_option("--out", out_override, "output directory");
    }
  };

  auto* tv = app.add_subcommand("train-vqsvae", "train the stage-1 model");
  add_common(tv, false);
  auto* ts = app.add_subcommand("train-sdid", "train the stage-2 denoiser");
  add_common(ts, false);
  ts->add_option("--vqsvae", vqsvae_override, "stage-1 checkpoint path");
  auto* rc = app.add_subcommand("reconstruct", "encode/decode dataset images");
  add_common(rc, true);
  auto* sm = app.add_subcommand("sample", "generate images from noise");
  add_common(sm, true);
  auto* ev = app.add_subcommand("eval", "report reconstruction metrics");
  add_common(ev, true);
  ev->get_option("--n")->default_val(0);

  CLI11_PARSE(app, argc, argv);

  try {
    Config cfg = parse_config_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (tv->parsed()) return cmd_train_vqsvae(cfg);
    if (ts->parsed())
      return cmd_train_sdid(
          cfg, vqsvae_override.empty() ? cfg.vqsvae_ckpt : vqsvae_override);
    if (rc->parsed()) return cmd_reconstruct(cfg, n_images);
    if (sm->parsed()) return cmd_sample(cfg, n_images);
    if (ev->parsed()) return cmd_eval(cfg, n_images);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
