#include <benchmark/benchmark.h>

#include "polypnet/layers.hpp"
#include "polypnet/models.hpp"
#include "polypnet/rng.hpp"

using namespace polypnet;

static void BM_Conv2dForward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  Conv2d conv(width, 3, 3, 3, 1, 1);
  conv.kernel() = rng_uniform(rng, {width, 3, 3, 3}, -0.1, 0.1);
  const Tensor x = rng_uniform(rng, {8, 3, 64, 64}, 0.0, 1.0);
  for (auto _ : state) {
    Tensor y = conv.forward(x, Mode::train, nullptr);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16)->Arg(32);

static void BM_SimpleCnnTrainStep(benchmark::State& state) {
  ModelSpec spec;
  spec.conv_blocks = 4;
  spec.base_width = static_cast<std::size_t>(state.range(0));
  Rng init(1);
  Network net = build_simple_cnn(spec, init);

  Rng rng(2);
  const Tensor x = rng_uniform(rng, {32, 3, 64, 64}, 0.0, 1.0);
  std::vector<double> yv(32);
  for (std::size_t i = 0; i < 32; ++i) yv[i] = static_cast<double>(i % 2);
  const Tensor y = Tensor({32, 1}, yv);

  Rng dropout_rng(9);
  for (auto _ : state) {
    Tensor probs = net.forward(x, Mode::train, &dropout_rng);
    benchmark::DoNotOptimize(net.loss(y));
    net.backward(y);
    benchmark::DoNotOptimize(probs.data());
  }
}
BENCHMARK(BM_SimpleCnnTrainStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);
