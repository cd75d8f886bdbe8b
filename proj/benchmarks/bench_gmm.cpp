#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "noisylab/gmm.hpp"
#include "noisylab/rng.hpp"

namespace {

std::vector<double> bimodal_losses(int n, std::uint64_t seed) {
  noisylab::Rng rng(seed);
  std::normal_distribution<double> lo(0.5, 0.1), hi(3.0, 0.5);
  std::bernoulli_distribution pick(0.5);
  std::vector<double> out(n);
  for (auto& v : out) v = std::max(0.0, pick(rng) ? lo(rng) : hi(rng));
  return out;
}

void BM_FitGmm1d(benchmark::State& state) {
  const auto losses = bimodal_losses(static_cast<int>(state.range(0)), 7);
  for (auto _ : state) {
    auto fit = noisylab::fit_gmm_1d(losses);
    benchmark::DoNotOptimize(fit.mu1);
  }
}
BENCHMARK(BM_FitGmm1d)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_PosteriorClean(benchmark::State& state) {
  const auto losses = bimodal_losses(10000, 7);
  const auto fit = noisylab::fit_gmm_1d(losses);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(noisylab::posterior_clean(fit, losses[i++ % losses.size()]));
  }
}
BENCHMARK(BM_PosteriorClean);

void BM_FitClassAware(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto losses = bimodal_losses(n, 7);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % 10;
  for (auto _ : state) {
    auto fits = noisylab::fit_class_aware(losses, labels, 10);
    benchmark::DoNotOptimize(fits.global.mu1);
  }
}
BENCHMARK(BM_FitClassAware)->Arg(2000)->Arg(20000);

}  // namespace

BENCHMARK_MAIN();
