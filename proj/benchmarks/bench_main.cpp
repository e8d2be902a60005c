// Microbenchmarks for the kernels that dominate training time.

#include <benchmark/benchmark.h>

#include <vector>

#include "spikegen/diffusion.hpp"
#include "spikegen/lif.hpp"
#include "spikegen/ops.hpp"
#include "spikegen/rng.hpp"
#include "spikegen/tensor.hpp"
#include "spikegen/vqsvae.hpp"

namespace {

using namespace spikegen;

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<float> d(static_cast<size_t>(numel(shape)));
  for (auto& v : d) v = rng.uniform(-1.0f, 1.0f);
  return Tensor::from(std::move(shape), std::move(d), requires_grad);
}

void BM_MatmulForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor a = random_tensor({n, n}, rng);
  Tensor b = random_tensor({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * int64_t{n} * n * n);
}
BENCHMARK(BM_MatmulForward)->Arg(64)->Arg(128)->Arg(256);

void BM_MatmulBackward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  for (auto _ : state) {
    Tensor a = random_tensor({n, n}, rng, true);
    Tensor b = random_tensor({n, n}, rng, true);
    sum(matmul(a, b)).backward();
    benchmark::DoNotOptimize(a.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * int64_t{n} * n * n * 2);
}
BENCHMARK(BM_MatmulBackward)->Arg(64)->Arg(128);

void BM_Conv2dForward(benchmark::State& state) {
  Rng rng(2);
  Tensor x = random_tensor({8, 16, 28, 28}, rng);
  Tensor w = random_tensor({32, 16, 3, 3}, rng);
  Tensor b = random_tensor({32}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b, 2, 1));
}
BENCHMARK(BM_Conv2dForward);

void BM_Conv2dBackward(benchmark::State& state) {
  Rng rng(2);
  for (auto _ : state) {
    Tensor x = random_tensor({8, 16, 28, 28}, rng, true);
    Tensor w = random_tensor({32, 16, 3, 3}, rng, true);
    Tensor b = random_tensor({32}, rng, true);
    sum(conv2d(x, w, b, 2, 1)).backward();
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_Conv2dBackward);

void BM_LifUnrolled(benchmark::State& state) {
  const int t_steps = static_cast<int>(state.range(0));
  Rng rng(3);
  LifParams p;
  Tensor x = random_tensor({32, 64, 14, 14}, rng, true);
  for (auto _ : state) {
    Tensor v = Tensor::full(x.shape(), p.v_reset);
    Tensor acc;
    for (int t = 0; t < t_steps; ++t) {
      auto r = lif_step(x, v, p, "bench");
      v = r.v;
      acc = acc.defined() ? add(acc, r.spike) : r.spike;
    }
    sum(acc).backward();
    x.zero_grad();
  }
}
BENCHMARK(BM_LifUnrolled)->Arg(4)->Arg(8);

void BM_VqsvaeTrainStep(benchmark::State& state) {
  Rng mr(4);
  Vqsvae model(VqsvaeConfig{}, mr);
  Rng dr(5);
  std::vector<float> img(32 * 28 * 28);
  for (auto& v : img) v = dr.uniform(0.0f, 1.0f);
  Tensor x = Tensor::from({32, 1, 28, 28}, std::move(img));
  for (auto _ : state) {
    VqsvaeForward f = model.forward(x);
    VqsvaeLossTerms lt = model.loss(x, f);
    model.params().zero_grad();
    lt.total.backward();
    benchmark::DoNotOptimize(lt.total.item());
  }
}
BENCHMARK(BM_VqsvaeTrainStep)->Unit(benchmark::kMillisecond);

void BM_SdidLossStep(benchmark::State& state) {
  Rng mr(6);
  Sdid model(SdidConfig{}, mr);
  DiffusionSchedule sched;
  Rng gr(7);
  TokenGrid g;
  g.n = 32;
  g.height = 7;
  g.width = 7;
  g.h.resize(static_cast<size_t>(g.size()));
  for (auto& t : g.h) t = gr.uniform_int(model.config().codebook_size);
  Rng nr(8);
  for (auto _ : state) {
    DiffusionLossResult r = diffusion_loss(g, sched, model, nr);
    model.params().zero_grad();
    r.loss.backward();
    benchmark::DoNotOptimize(r.loss.item());
  }
}
BENCHMARK(BM_SdidLossStep)->Unit(benchmark::kMillisecond);

void BM_SampleTokens(benchmark::State& state) {
  Rng mr(9);
  Sdid model(SdidConfig{}, mr);
  DiffusionSchedule sched;
  Rng rng(10);
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_tokens(model, sched, 16, 7, 7, rng));
}
BENCHMARK(BM_SampleTokens)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
