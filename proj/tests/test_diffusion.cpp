#include <cmath>
#include <numeric>
#include <vector>

#include <doctest.h>

#include "spikegen/diffusion.hpp"
#include "test_util.hpp"

using namespace spikegen;

TEST_CASE("absorption schedule values and bounds") {
  DiffusionSchedule sched{4};
  CHECK(sched.gamma(1) == doctest::Approx(0.25));
  CHECK(sched.gamma(2) == doctest::Approx(1.0 / 3.0));
  CHECK(sched.gamma(3) == doctest::Approx(0.5));
  CHECK(sched.gamma(4) == doctest::Approx(1.0));
  CHECK_THROWS_AS(sched.gamma(0), std::out_of_range);
  CHECK_THROWS_AS(sched.gamma(5), std::out_of_range);
  CHECK(sched.mask_marginal(0) == doctest::Approx(0.0));
  CHECK(sched.mask_marginal(2) == doctest::Approx(0.5));
  CHECK(sched.mask_marginal(4) == doctest::Approx(1.0));
}

TEST_CASE("transition matrix structure") {
  DiffusionSchedule sched{2};
  SUBCASE("K=2, t=1: gamma = 1/2") {
    auto q = transition_matrix(1, sched, 2);
    REQUIRE(q.size() == 9);
    // rows: [0.5, 0, 0.5], [0, 0.5, 0.5], [0, 0, 1]
    CHECK(q[0] == doctest::Approx(0.5));
    CHECK(q[1] == doctest::Approx(0.0));
    CHECK(q[2] == doctest::Approx(0.5));
    CHECK(q[3] == doctest::Approx(0.0));
    CHECK(q[4] == doctest::Approx(0.5));
    CHECK(q[5] == doctest::Approx(0.5));
    CHECK(q[6] == doctest::Approx(0.0));
    CHECK(q[7] == doctest::Approx(0.0));
    CHECK(q[8] == doctest::Approx(1.0));
  }
  SUBCASE("rows are stochastic and the mask row absorbs") {
    DiffusionSchedule s16{16};
    for (int t = 1; t <= 16; ++t) {
      auto q = transition_matrix(t, s16, 5);
      const int dim = 6;
      for (int i = 0; i < dim; ++i) {
        double row = 0.0;
        for (int j = 0; j < dim; ++j) row += q[static_cast<size_t>(i) * dim + j];
        CHECK(row == doctest::Approx(1.0));
      }
      CHECK(q[5 * dim + 5] == 1.0f);
      // off-diagonal entries outside the mask column are zero
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
          if (i != j) CHECK(q[static_cast<size_t>(i) * dim + j] == 0.0f);
    }
  }
  SUBCASE("final step masks everything") {
    DiffusionSchedule s{3};
    auto q = transition_matrix(3, s, 4);
    for (int i = 0; i < 4; ++i) {
      CHECK(q[static_cast<size_t>(i) * 5 + i] == doctest::Approx(0.0));
      CHECK(q[static_cast<size_t>(i) * 5 + 4] == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("closed-form corruption endpoints") {
  DiffusionSchedule sched{8};
  Rng rng(103);
  TokenGrid h0{{1, 2, 3, 0, 1, 2}, 1, 2, 3};
  SUBCASE("t=0 leaves everything intact") {
    auto g = forward_corrupt(h0, 0, sched, 4, rng);
    CHECK(g.h == h0.h);
    CHECK(g.t == 0);
  }
  SUBCASE("t=T_d masks every site") {
    auto g = forward_corrupt(h0, 8, sched, 4, rng);
    for (int tok : g.h) CHECK(tok == 4);
  }
  SUBCASE("pre-masked input is rejected") {
    TokenGrid bad{{1, 4}, 1, 1, 2};
    CHECK_THROWS_AS(forward_corrupt(bad, 1, sched, 4, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("stepwise chain matches the closed-form marginal statistically") {
  // Running t single steps must mask each site with prob t/T_d; compare the
  // empirical rate from the chain against the closed-form probability.
  DiffusionSchedule sched{8};
  Rng rng(107);
  const int trials = 4000;
  const int t_target = 3;
  int chain_masked = 0;
  TokenGrid h0{{0}, 1, 1, 1};
  for (int i = 0; i < trials; ++i) {
    MaskedGrid g = forward_corrupt(h0, 0, sched, 2, rng);
    for (int t = 0; t < t_target; ++t)
      g = forward_corrupt_step(g, sched, 2, rng);
    if (g.h[0] == 2) ++chain_masked;
  }
  const double want = sched.mask_marginal(t_target);  // 3/8
  const double got = static_cast<double>(chain_masked) / trials;
  // binomial std at p=0.375, n=4000 is ~0.0077; allow 4 sigma
  CHECK(std::abs(got - want) < 0.031);
}

namespace {

SdidConfig small_sdid_config() {
  SdidConfig cfg;
  cfg.codebook_size = 6;
  cfg.t_diffusion = 4;
  cfg.channels = 8;
  cfg.t_steps = 3;
  return cfg;
}

}  // namespace

TEST_CASE("denoiser output shape, finiteness, and time conditioning") {
  Rng rng(109);
  SdidConfig cfg = small_sdid_config();
  Sdid model(cfg, rng);
  const int n = 2, h = 3, w = 3;
  std::vector<int> tokens(static_cast<size_t>(n) * h * w, 6);  // fully masked
  Tensor a = model.forward(tokens, {1, 1}, n, h, w);
  CHECK(a.shape() == Shape{n, 6, h, w});
  for (float v : a.data()) CHECK(std::isfinite(v));

  CHECK_THROWS_AS(model.forward(tokens, {0, 1}, n, h, w), std::out_of_range);
  CHECK_THROWS_AS(model.forward(tokens, {1}, n, h, w), std::invalid_argument);

  // With the default threshold a freshly initialized net may stay silent for
  // every conditioning, so probe time conditioning on an excitable variant.
  SdidConfig hot = cfg;
  hot.v_th = 0.05f;
  Rng rng2(211);
  Sdid excitable(hot, rng2);
  Tensor a1 = excitable.forward(tokens, {1, 1}, n, h, w);
  Tensor b1 = excitable.forward(tokens, {4, 4}, n, h, w);
  double diff = 0.0;
  for (size_t i = 0; i < a1.data().size(); ++i)
    diff += std::abs(a1.data()[i] - b1.data()[i]);
  CHECK(diff > 1e-4);
}

TEST_CASE("masked cross-entropy weighting on hand-built logits") {
  // Uniform logits make every site cost ln K; the loss then reduces to the
  // mean over samples of (T_d/t) * ln K whenever any site is masked.
  const int n = 2, height = 2, width = 1, k = 5, t_d = 4;
  Tensor logits = Tensor::zeros({n, k, height, width}, true);
  TokenGrid targets{{1, 3, 0, 2}, n, height, width};
  std::vector<char> masked = {1, 0, 1, 1};
  std::vector<int> t = {1, 4};
  std::vector<int> cnt = {1, 2};
  Tensor loss = masked_ce_loss(logits, targets, masked, t, cnt, t_d);
  const double lnk = std::log(5.0);
  const double want = 0.5 * ((4.0 / 1.0) * lnk + (4.0 / 4.0) * lnk);
  CHECK(loss.item() == doctest::Approx(want).epsilon(1e-5));

  SUBCASE("unmasked sites receive exactly zero gradient") {
    loss.backward();
    const auto& g = logits.grad();
    const int sp = height * width;
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < sp; ++p) {
        const size_t site = static_cast<size_t>(i) * sp + p;
        double mag = 0.0;
        for (int c = 0; c < k; ++c)
          mag += std::abs(g[(static_cast<size_t>(i) * k + c) * sp + p]);
        if (masked[site])
          CHECK(mag > 0.0);
        else
          CHECK(mag == 0.0);
      }
  }

  SUBCASE("a sample with no masked sites contributes nothing") {
    std::vector<char> none = {0, 0, 1, 1};
    std::vector<int> cnt0 = {0, 2};
    Tensor l2 = masked_ce_loss(logits, targets, none, t, cnt0, t_d);
    CHECK(l2.item() == doctest::Approx(0.5 * (4.0 / 4.0) * lnk).epsilon(1e-5));
  }
}

TEST_CASE("diffusion_loss is finite and reports valid draws") {
  Rng rng(113);
  SdidConfig cfg = small_sdid_config();
  Sdid model(cfg, rng);
  TokenGrid h0{{0, 1, 2, 3, 4, 5, 0, 1, 2}, 1, 3, 3};
  DiffusionSchedule sched{cfg.t_diffusion};
  Rng lr(127);
  auto res = diffusion_loss(h0, sched, model, lr);
  CHECK(std::isfinite(res.loss.item()));
  CHECK(res.loss.item() >= 0.0f);
  REQUIRE(res.t.size() == 1);
  CHECK(res.t[0] >= 1);
  CHECK(res.t[0] <= cfg.t_diffusion);
  CHECK(res.masked_count[0] <= 9);
  res.loss.backward();
  CHECK(model.params().find("sdid.token_emb").has_grad());
  CHECK(model.params().find("sdid.head_w").has_grad());
}

TEST_CASE("sampler behaviour") {
  Rng rng(131);
  SdidConfig cfg = small_sdid_config();
  Sdid model(cfg, rng);
  DiffusionSchedule sched{cfg.t_diffusion};
  SUBCASE("all sites revealed and in range") {
    Rng sr(137);
    SampleStats stats;
    TokenGrid g = sample_tokens(model, sched, 2, 3, 3, sr, 1.0f, &stats);
    CHECK(g.n == 2);
    for (int tok : g.h) {
      CHECK(tok >= 0);
      CHECK(tok < cfg.codebook_size);
    }
    REQUIRE(stats.masked_before.size() == 4);
    CHECK(stats.masked_before[0] == 18);  // starts fully masked
    // bookkeeping consistency: reveals always equal the drop in mask count
    int total_revealed = 0;
    for (size_t s = 0; s + 1 < stats.masked_before.size(); ++s)
      CHECK(stats.masked_before[s] - stats.revealed[s] ==
            stats.masked_before[s + 1]);
    for (int r : stats.revealed) total_revealed += r;
    CHECK(total_revealed == 18);
    // the final step reveals every remaining site (reveal prob 1/1)
    CHECK(stats.masked_before.back() == stats.revealed.back());
  }
  SUBCASE("single-step schedule reveals everything at once") {
    SdidConfig c1 = small_sdid_config();
    c1.t_diffusion = 1;
    Rng mr(139);
    Sdid m1(c1, mr);
    Rng sr(149);
    SampleStats stats;
    TokenGrid g = sample_tokens(m1, DiffusionSchedule{1}, 1, 2, 2, sr, 1.0f,
                                &stats);
    REQUIRE(stats.revealed.size() == 1);
    CHECK(stats.revealed[0] == 4);
    for (int tok : g.h) CHECK(tok < c1.codebook_size);
  }
  SUBCASE("non-positive temperature is rejected") {
    Rng sr(151);
    CHECK_THROWS_AS(sample_tokens(model, sched, 1, 2, 2, sr, 0.0f),
                    std::invalid_argument);
  }
}

TEST_CASE("end-to-end generation produces images in range") {
  Rng rng(157);
  VqsvaeConfig vcfg;
  vcfg.channels = 4;
  vcfg.codebook_size = 6;
  vcfg.t_steps = 2;
  Vqsvae vq(vcfg, rng);
  Rng rng2(163);
  SdidConfig scfg = small_sdid_config();
  scfg.channels = 4;
  Sdid sd(scfg, rng2);
  Rng sr(167);
  Tensor imgs =
      generate_images(sd, DiffusionSchedule{scfg.t_diffusion}, vq, 2, 3, 3, sr);
  CHECK(imgs.shape() == Shape{2, 1, 12, 12});
  for (float v : imgs.data()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}
