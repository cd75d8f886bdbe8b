#include <benchmark/benchmark.h>

#include "noisylab/dataset.hpp"
#include "noisylab/prototype_cleaner.hpp"
#include "noisylab/stats.hpp"

namespace {

using namespace noisylab;

struct Fixture {
  Eigen::MatrixXd embeddings;
  std::vector<int> labels;
  PrototypeBank bank;
  std::vector<double> scores;
  std::vector<bool> is_clean;

  explicit Fixture(int n) {
    Rng rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int k = 10, d = 8;
    embeddings.resize(n, d);
    labels.resize(n);
    is_clean.resize(n);
    scores.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) embeddings(i, j) = gauss(rng);
      embeddings.row(i).normalize();
      labels[i] = i % k;
      is_clean[i] = (i % 3) != 0;
      scores[i] = std::uniform_real_distribution<double>(0, 1)(rng);
    }
    bank = make_bank(k, d, 0.5, 1.0);
    for (int r = 0; r < k; ++r)
      for (int j = 0; j < d; ++j) bank.prototypes(r, j) = gauss(rng);
  }
};

void BM_CleanScores(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const CleanerScores s = clean_scores(f.embeddings, f.bank, f.labels);
    benchmark::DoNotOptimize(s.q_clean[0]);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CleanScores)->Arg(2000)->Arg(20000);

void BM_Auc(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(auc(f.scores, f.is_clean));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auc)->Arg(2000)->Arg(20000);

void BM_KsTwoSample(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  std::vector<double> a, b;
  for (int i = 0; i < static_cast<int>(f.scores.size()); ++i)
    (f.is_clean[i] ? a : b).push_back(f.scores[i]);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ks_two_sample(a, b).statistic);
  }
}
BENCHMARK(BM_KsTwoSample)->Arg(2000)->Arg(20000);

}  // namespace
