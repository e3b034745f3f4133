#include <benchmark/benchmark.h>

#include "polypnet/rng.hpp"
#include "polypnet/tensor.hpp"

using namespace polypnet;

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  const Tensor a = rng_uniform(rng, {n, n}, -1.0, 1.0);
  const Tensor b = rng_uniform(rng, {n, n}, -1.0, 1.0);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256)->Arg(512);

static void BM_ReduceSum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  const Tensor t = rng_uniform(rng, {n}, 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sum(t));
  }
}
BENCHMARK(BM_ReduceSum)->Arg(1 << 12)->Arg(1 << 18);
