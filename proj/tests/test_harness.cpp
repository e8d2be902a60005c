#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "spikegen/checkpoint.hpp"
#include "spikegen/config.hpp"
#include "spikegen/synthetic.hpp"
#include "spikegen/trainer.hpp"
#include "test_util.hpp"

using namespace spikegen;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("spikegen-harness-" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

IdxDataset tiny_dataset(int count, uint64_t seed) {
  IdxDataset ds;
  ds.images = synthetic_digits(count, 12, seed);
  return ds;
}

Config tiny_config() {
  Config cfg;
  cfg.subset = 16;
  cfg.t_steps = 2;
  cfg.t_diffusion = 4;
  cfg.channels = 4;
  cfg.codebook_size = 8;
  cfg.sdid_channels = 8;
  cfg.batch_size = 8;
  cfg.epochs = 1;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("config serialization round-trips through the parser") {
  Config cfg;
  cfg.dataset_images = "data/images.idx";
  cfg.subset = 123;
  cfg.lr = 0.5f;
  cfg.dataset_transpose = true;
  cfg.seed = 987654321;
  const std::string text = serialize_config(cfg);
  Config back = parse_config_text(text, "mem");
  CHECK(serialize_config(back) == text);
  CHECK(back.dataset_images == "data/images.idx");
  CHECK(back.subset == 123);
  CHECK(back.dataset_transpose);
  CHECK(back.seed == 987654321);
}

TEST_CASE("config parser diagnostics carry origin and line") {
  CHECK_THROWS_WITH_AS(parse_config_text("bogus_key=1\n", "f.cfg"),
                       doctest::Contains("f.cfg:1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("lr=0.1\nnot a pair\n", "f.cfg"),
                       doctest::Contains("f.cfg:2"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("epochs=three\n", "f.cfg"),
                       doctest::Contains("epochs"), std::invalid_argument);
  // comments and blank lines are fine
  Config c = parse_config_text("# a comment\n\n  lr = 0.25  # trailing\n", "m");
  CHECK(c.lr == doctest::Approx(0.25));
}

TEST_CASE("config validation names the offending field") {
  Config cfg;
  cfg.t_steps = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("t_steps"),
                       std::invalid_argument);
  cfg = Config{};
  cfg.codebook_size = 1;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("codebook_size"),
                       std::invalid_argument);
  cfg = Config{};
  cfg.v_th = 0.0f;
  cfg.v_reset = 0.0f;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("v_th"),
                       std::invalid_argument);
  Config{}.validate();  // defaults are valid
}

TEST_CASE("checkpoint round trip restores every parameter") {
  TempDir tmp;
  Rng rng(191);
  ParamStore a;
  a.add("w1", testutil::random_tensor({3, 4}, rng));
  a.add("w2", testutil::random_tensor({2, 2, 3, 3}, rng));
  a.add("b", testutil::random_tensor({7}, rng));
  save_checkpoint(tmp.file("p.ckpt"), a);

  ParamStore b;
  b.add("w1", Tensor::zeros({3, 4}, true));
  b.add("w2", Tensor::zeros({2, 2, 3, 3}, true));
  b.add("b", Tensor::zeros({7}, true));
  load_checkpoint(tmp.file("p.ckpt"), b);
  for (size_t i = 0; i < a.items.size(); ++i)
    CHECK(a.items[i].second.data() == b.items[i].second.data());
}

TEST_CASE("checkpoint mismatches are rejected") {
  TempDir tmp;
  Rng rng(193);
  ParamStore a;
  a.add("w", testutil::random_tensor({3, 4}, rng));
  save_checkpoint(tmp.file("p.ckpt"), a);

  SUBCASE("wrong shape") {
    ParamStore b;
    b.add("w", Tensor::zeros({4, 3}, true));
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.file("p.ckpt"), b),
                         doctest::Contains("shape mismatch"),
                         std::runtime_error);
  }
  SUBCASE("wrong record count") {
    ParamStore b;
    b.add("w", Tensor::zeros({3, 4}, true));
    b.add("extra", Tensor::zeros({1}, true));
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.file("p.ckpt"), b),
                         doctest::Contains("records"), std::runtime_error);
  }
  SUBCASE("corrupted magic") {
    std::ofstream out(tmp.file("junk.ckpt"), std::ios::binary);
    out << "NOTACKPT but long enough to read";
    out.close();
    ParamStore b;
    b.add("w", Tensor::zeros({3, 4}, true));
    CHECK_THROWS_WITH_AS(load_checkpoint(tmp.file("junk.ckpt"), b),
                         doctest::Contains("magic"), std::runtime_error);
  }
}

TEST_CASE("stage-1 training produces finite decreasing-capable metrics") {
  Config cfg = tiny_config();
  cfg.epochs = 2;
  IdxDataset ds = tiny_dataset(16, 11);
  Rng mr(cfg.seed);
  Vqsvae model(vqsvae_config_from(cfg), mr);
  std::ostringstream log;
  auto hist = train_vqsvae(cfg, model, ds, &log);
  REQUIRE(hist.size() == 2);
  for (const auto& e : hist) {
    CHECK(std::isfinite(e.loss));
    CHECK(e.mse >= 0.0);
    CHECK(e.ssim_loss >= 0.0);
    CHECK(e.perplexity >= 1.0);
    CHECK(e.perplexity <= cfg.codebook_size);
  }
  // progress stream carries one CSV row per epoch
  std::istringstream rows(log.str());
  std::string line;
  int lines = 0;
  while (std::getline(rows, line)) ++lines;
  CHECK(lines == 2);
}

TEST_CASE("zero-epoch runs do no training work") {
  Config cfg = tiny_config();
  cfg.epochs = 0;
  IdxDataset ds = tiny_dataset(16, 11);
  Rng mr(cfg.seed);
  Vqsvae model(vqsvae_config_from(cfg), mr);
  CHECK(train_vqsvae(cfg, model, ds).empty());

  Rng sr(cfg.seed);
  Sdid sdid(sdid_config_from(cfg), sr);
  auto hist = train_sdid(cfg, sdid, model, ds);
  // only the pre-training held-out evaluation remains
  REQUIRE(hist.size() == 1);
  CHECK(hist[0].epoch == 0);
  CHECK(std::isfinite(hist[0].heldout_loss));
}

TEST_CASE("stage-2 training rejects mismatched codebook sizes") {
  Config cfg = tiny_config();
  IdxDataset ds = tiny_dataset(16, 11);
  Rng mr(cfg.seed);
  Vqsvae model(vqsvae_config_from(cfg), mr);
  Config other = cfg;
  other.codebook_size = 16;
  Rng sr(cfg.seed);
  Sdid sdid(sdid_config_from(other), sr);
  CHECK_THROWS_WITH_AS(train_sdid(cfg, sdid, model, ds),
                       doctest::Contains("stage mismatch"),
                       std::invalid_argument);
}

TEST_CASE("identical seeds give bitwise-identical training runs") {
  Config cfg = tiny_config();
  IdxDataset ds = tiny_dataset(16, 11);

  auto run_once = [&](const std::string& ckpt_path) {
    Rng mr(cfg.seed);
    Vqsvae model(vqsvae_config_from(cfg), mr);
    auto h1 = train_vqsvae(cfg, model, ds);
    Rng sr(cfg.seed);
    Sdid sdid(sdid_config_from(cfg), sr);
    auto h2 = train_sdid(cfg, sdid, model, ds);
    ParamStore all = model.params();
    for (auto& it : sdid.params().items) all.items.push_back(it);
    save_checkpoint(ckpt_path, all);
    return std::make_pair(h1, h2);
  };

  TempDir tmp;
  auto [a1, a2] = run_once(tmp.file("a.ckpt"));
  auto [b1, b2] = run_once(tmp.file("b.ckpt"));

  REQUIRE(a1.size() == b1.size());
  for (size_t i = 0; i < a1.size(); ++i) {
    CHECK(a1[i].loss == b1[i].loss);
    CHECK(a1[i].mse == b1[i].mse);
    CHECK(a1[i].perplexity == b1[i].perplexity);
  }
  REQUIRE(a2.size() == b2.size());
  for (size_t i = 0; i < a2.size(); ++i) {
    CHECK(a2[i].train_loss == b2[i].train_loss);
    CHECK(a2[i].heldout_loss == b2[i].heldout_loss);
  }

  std::ifstream fa(tmp.file("a.ckpt"), std::ios::binary);
  std::ifstream fb(tmp.file("b.ckpt"), std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(fa)), {});
  std::string sb((std::istreambuf_iterator<char>(fb)), {});
  REQUIRE(!sa.empty());
  CHECK(sa == sb);
}

TEST_CASE("csv rows match their headers") {
  VqsvaeEpoch v;
  v.epoch = 3;
  std::string header = vqsvae_csv_header();
  std::string row = vqsvae_csv_row(v);
  const auto commas = [](const std::string& s) {
    return std::count(s.begin(), s.end(), ',');
  };
  CHECK(commas(header) == commas(row));
  CHECK(commas(sdid_csv_header()) == commas(sdid_csv_row(SdidEpoch{})));
}

TEST_CASE("synthetic digits are deterministic, labeled and in range") {
  std::vector<int> labels;
  Tensor a = synthetic_digits(20, 12, 77, &labels);
  CHECK(a.shape() == Shape{20, 1, 12, 12});
  REQUIRE(labels.size() == 20);
  for (int i = 0; i < 20; ++i) CHECK(labels[static_cast<size_t>(i)] == i % 10);
  for (float v : a.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  Tensor b = synthetic_digits(20, 12, 77);
  CHECK(a.data() == b.data());
  // a different seed must change the renders
  Tensor c = synthetic_digits(20, 12, 78);
  CHECK(a.data() != c.data());
}
