#include <benchmark/benchmark.h>

#include "stc/bridge.hpp"
#include "stc/layers.hpp"
#include "stc/metrics.hpp"
#include "stc/rng.hpp"
#include "stc/tensor.hpp"

namespace {

using namespace stc;

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& x : t.values()) x = static_cast<real>(rng.normal());
  return t;
}

void BM_Matvec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor m = random_tensor({n, n}, rng);
  Tensor v = random_tensor({n}, rng);
  for (auto _ : state) {
    Graph g;
    g.set_grad_enabled(false);
    benchmark::DoNotOptimize(g.matvec(m, v).values().data());
  }
}
BENCHMARK(BM_Matvec)->Arg(64)->Arg(256);

void BM_LstmStep(benchmark::State& state) {
  const int h = static_cast<int>(state.range(0));
  Rng rng(1);
  nn::LstmParams p = nn::init_lstm(h, h, rng);
  Tensor x = random_tensor({static_cast<std::size_t>(h)}, rng);
  Tensor hh = random_tensor({static_cast<std::size_t>(h)}, rng);
  Tensor cc = random_tensor({static_cast<std::size_t>(h)}, rng);
  for (auto _ : state) {
    Graph g;
    g.set_grad_enabled(false);
    auto [nh, nc] = nn::lstm_step(g, p, x, hh, cc);
    benchmark::DoNotOptimize(nh.values().data());
  }
}
BENCHMARK(BM_LstmStep)->Arg(64)->Arg(128);

void BM_SharpenRows(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor p = Tensor::zeros({rows, 30});
  for (auto& x : p.values()) x = static_cast<real>(rng.uniform(0.01, 1.0));
  for (std::size_t r = 0; r < rows; ++r) {
    real s = 0;
    for (std::size_t v = 0; v < 30; ++v) s += p.values()[r * 30 + v];
    for (std::size_t v = 0; v < 30; ++v) p.values()[r * 30 + v] /= s;
  }
  for (auto _ : state) {
    Graph g;
    g.set_grad_enabled(false);
    benchmark::DoNotOptimize(g.sharpen_rows(p, 2.0).values().data());
  }
}
BENCHMARK(BM_SharpenRows)->Arg(16)->Arg(128);

void BM_Wer(benchmark::State& state) {
  Rng rng(1);
  TokenCorpus refs, hyps;
  for (int i = 0; i < 64; ++i) {
    std::vector<int> r, h;
    for (int j = 0; j < static_cast<int>(state.range(0)); ++j) {
      r.push_back(static_cast<int>(rng.uniform_int(4, 29)));
      h.push_back(static_cast<int>(rng.uniform_int(4, 29)));
    }
    refs.push_back(r);
    hyps.push_back(h);
  }
  for (auto _ : state) benchmark::DoNotOptimize(wer(refs, hyps).value);
}
BENCHMARK(BM_Wer)->Arg(10)->Arg(50);

}  // namespace

BENCHMARK_MAIN();
