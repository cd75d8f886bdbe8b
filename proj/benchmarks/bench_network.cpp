#include <benchmark/benchmark.h>

#include "noisylab/network.hpp"
#include "noisylab/rng.hpp"

namespace {

using namespace noisylab;

NetworkConfig bench_config() {
  NetworkConfig cfg;
  cfg.input_dim = 16;
  cfg.num_classes = 10;
  cfg.hidden = {64, 64};
  cfg.embed_dim = 8;
  return cfg;
}

Eigen::MatrixXd random_batch(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) x(i, j) = gauss(rng);
  return x;
}

void BM_Forward(benchmark::State& state) {
  Network net(bench_config(), 3);
  const Eigen::MatrixXd x = random_batch(static_cast<int>(state.range(0)), 16, 11);
  for (auto _ : state) {
    const ForwardBatch out = net.forward(x);
    benchmark::DoNotOptimize(out.probs(0, 0));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(2048);

void BM_ForwardBackwardStep(benchmark::State& state) {
  Network net(bench_config(), 3);
  SgdOptimizer opt({0.02, 0.9, 5e-4});
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd x = random_batch(n, 16, 11);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % 10;
  for (auto _ : state) {
    const ForwardBatch out = net.forward(x);
    BackpropSeed seed;
    seed.d_logits = out.probs;
    for (int i = 0; i < n; ++i) seed.d_logits(i, labels[i]) -= 1.0;
    seed.d_logits /= static_cast<double>(n);
    const NetworkGradients grads = net.backward(out, seed, false);
    sgd_step(net, grads, opt, ParamGroup::backbone_and_classifier);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ForwardBackwardStep)->Arg(128);

}  // namespace
