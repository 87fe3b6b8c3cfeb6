#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "vflsim/objectives.hpp"
#include "vflsim/runtime.hpp"
#include "vflsim/secure_agg.hpp"
#include "vflsim/synthetic.hpp"

namespace {

using namespace vflsim;

void BM_MaskedAggregate(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  const auto trees = build_tree_pair(q, 1);
  std::mt19937_64 eng(2);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> partials(q);
  for (double& p : partials) p = unif(eng);

  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto [result, transcript] = masked_aggregate(partials, ++seed, trees);
    benchmark::DoNotOptimize(result);
    benchmark::DoNotOptimize(transcript.messages.size());
  }
}
BENCHMARK(BM_MaskedAggregate)->Arg(4)->Arg(8)->Arg(16);

void BM_BlockGradient(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> x(dim), w(dim);
  for (double& v : x) v = unif(eng);
  for (double& v : w) v = unif(eng);
  for (auto _ : state) {
    auto g = block_gradient(-0.37, x, 1e-2, RegularizerKind::L2, w);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_BlockGradient)->Arg(16)->Arg(64)->Arg(256);

void BM_FullObjective(benchmark::State& state) {
  auto raw = make_synthetic({.n = 500, .d = 64, .seed = 7});
  const auto data = PartitionedDataset::vertical_split(raw, 4, 7);
  HyperParams hp;
  hp.loss = LossKind::Logistic;
  hp.regularizer = RegularizerKind::L2;
  hp.lambda = 1e-2;
  std::vector<double> w(64, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(full_objective(data, w, hp));
  }
}
BENCHMARK(BM_FullObjective);

void BM_DeterministicEpoch(benchmark::State& state) {
  const auto alg = static_cast<Algorithm>(state.range(0));
  auto raw = make_synthetic({.n = 200, .d = 32, .seed = 11});
  const auto data = PartitionedDataset::vertical_split(raw, 4, 11);
  SimConfig cfg;
  cfg.q = 4;
  cfg.m = 2;
  cfg.mode = RunMode::Async;
  cfg.deterministic = true;
  cfg.hp.algorithm = alg;
  cfg.hp.loss = LossKind::Logistic;
  cfg.hp.regularizer = RegularizerKind::L2;
  cfg.hp.lambda = 1e-2;
  cfg.hp.gamma = 0.2;
  cfg.hp.epochs = 1;
  cfg.hp.tau1 = 3;
  cfg.hp.tau2 = 3;
  cfg.hp.seed = 11;
  for (auto _ : state) {
    const auto trace = run(cfg, data);
    benchmark::DoNotOptimize(trace.final_w.data());
  }
}
BENCHMARK(BM_DeterministicEpoch)
    ->Arg(static_cast<int>(Algorithm::Sgd))
    ->Arg(static_cast<int>(Algorithm::Svrg))
    ->Arg(static_cast<int>(Algorithm::Saga));

void BM_ThreadedAsyncEpoch(benchmark::State& state) {
  auto raw = make_synthetic({.n = 200, .d = 32, .seed = 13});
  const auto data = PartitionedDataset::vertical_split(raw, 4, 13);
  SimConfig cfg;
  cfg.q = 4;
  cfg.m = 2;
  cfg.k = 2;
  cfg.mode = RunMode::Async;
  cfg.deterministic = false;
  cfg.hp.algorithm = Algorithm::Svrg;
  cfg.hp.loss = LossKind::Logistic;
  cfg.hp.regularizer = RegularizerKind::L2;
  cfg.hp.lambda = 1e-2;
  cfg.hp.gamma = 0.2;
  cfg.hp.epochs = 1;
  cfg.hp.tau1 = 100000;
  cfg.hp.tau2 = 100000;
  cfg.hp.seed = 13;
  for (auto _ : state) {
    const auto trace = run(cfg, data);
    benchmark::DoNotOptimize(trace.final_w.data());
  }
}
BENCHMARK(BM_ThreadedAsyncEpoch);

}  // namespace

BENCHMARK_MAIN();
