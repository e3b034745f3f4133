#include <benchmark/benchmark.h>

#include "polypnet/augment.hpp"
#include "polypnet/metrics.hpp"
#include "polypnet/synthetic.hpp"

using namespace polypnet;

static void BM_AugmentSample(benchmark::State& state) {
  SyntheticConfig cfg;
  cfg.count = 1;
  const auto samples = make_blob_samples(cfg, 5);
  AugmentConfig acfg;
  acfg.horizontal_flip = true;
  acfg.rotation_max_deg = 20.0;
  acfg.shift_max_frac = 0.1;
  acfg.zoom_range = {0.9, 1.1};
  Rng rng(11);
  for (auto _ : state) {
    Sample s = augment_sample(samples[0], acfg, rng);
    benchmark::DoNotOptimize(s.image.data());
  }
}
BENCHMARK(BM_AugmentSample);

static void BM_Roc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(13);
  std::vector<double> scores(n), labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.next_double();
    labels[i] = static_cast<double>(rng.next_below(2));
  }
  for (auto _ : state) {
    RocCurve c = roc(scores, labels);
    benchmark::DoNotOptimize(c.auc);
  }
}
BENCHMARK(BM_Roc)->Arg(200)->Arg(2000);
