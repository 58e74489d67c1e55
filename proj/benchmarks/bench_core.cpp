#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "kmesn/clustering.hpp"
#include "kmesn/hyperopt.hpp"
#include "kmesn/linalg.hpp"
#include "kmesn/reservoir.hpp"
#include "kmesn/synthetic.hpp"

namespace {

using namespace kmesn;

HyperParams shape(std::size_t n_res, std::size_t n_in = 20) {
  HyperParams hp;
  hp.reservoir_size = n_res;
  hp.input_dim = n_in;
  hp.output_dim = 8;
  hp.input_fanin = std::min<std::size_t>(10, n_in);
  hp.recurrent_fanin = 10;
  hp.spectral_radius = 0.9;
  hp.leakage = 0.3;
  hp.bias_scaling = 0.5;
  return hp;
}

DenseMatrix noise(std::size_t rows, std::size_t cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = n(rng);
  return m;
}

void BM_spmv(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const WeightSet w = init_random_weights(shape(n), 1);
  std::vector<double> x(n, 0.5), y(n);
  for (auto _ : state) {
    spmv_into(w.w_res, x, y);
    benchmark::DoNotOptimize(y.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.w_res.nnz()));
}
BENCHMARK(BM_spmv)->RangeMultiplier(2)->Range(50, 1600);

void BM_spectral_radius(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const WeightSet w = init_random_weights(shape(n), 2);
  for (auto _ : state) benchmark::DoNotOptimize(largest_abs_eigenvalue(w.w_res));
}
BENCHMARK(BM_spectral_radius)->RangeMultiplier(2)->Range(50, 800)->Unit(benchmark::kMillisecond);

void BM_run_sequence(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const HyperParams hp = shape(n);
  const WeightSet w = init_random_weights(hp, 3);
  const DenseMatrix u = noise(1000, hp.input_dim, 4);
  for (auto _ : state) benchmark::DoNotOptimize(run_sequence(u, w, hp));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_run_sequence)->RangeMultiplier(2)->Range(50, 800)->Unit(benchmark::kMicrosecond);

void BM_accumulate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const DenseMatrix states = noise(1000, n + 1, 5);
  const DenseMatrix targets = noise(1000, 8, 6);
  ReadoutAccumulator acc(n + 1, 8);
  for (auto _ : state) {
    acc.accumulate(states, targets);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_accumulate)->RangeMultiplier(2)->Range(50, 800)->Unit(benchmark::kMicrosecond);

void BM_finalize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ReadoutAccumulator acc(n + 1, 8);
  acc.accumulate(noise(2 * n + 10, n + 1, 7), noise(2 * n + 10, 8, 8));
  for (auto _ : state) benchmark::DoNotOptimize(finalize(acc, 1e-3));
}
BENCHMARK(BM_finalize)->RangeMultiplier(2)->Range(50, 800)->Unit(benchmark::kMillisecond);

void BM_minibatch_kmeans(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const DenseMatrix x = noise(6000, 20, 9);
  ClusterConfig cfg;
  cfg.k = k;
  cfg.max_iterations = 100;
  for (auto _ : state) benchmark::DoNotOptimize(minibatch_kmeans(x, cfg));
}
BENCHMARK(BM_minibatch_kmeans)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_candidate_evaluation(benchmark::State& state) {
  const TrainTestSplit split = make_markov_task(MarkovTaskConfig{});
  HyperParams hp = search_defaults(shape(static_cast<std::size_t>(state.range(0))), TaskKind::sequence_level);
  const CandidateEvaluator ev(split.train, init_random_weights(hp, 0), kfold_split(split.train.sequences.size(), {5, 0}));
  for (auto _ : state) benchmark::DoNotOptimize(ev.evaluate(hp));
}
BENCHMARK(BM_candidate_evaluation)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
