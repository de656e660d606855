// Serial references against the OpenMP kernels. Thread counts are the
// benchmark argument; 0 means the OpenMP default.
#include <benchmark/benchmark.h>

#include <omp.h>

#include "irl/dei.hpp"
#include "irl/environments.hpp"
#include "irl/game.hpp"
#include "irl/gridworld.hpp"
#include "irl/tabular.hpp"

using namespace irl;

namespace {

void set_threads(const benchmark::State& state) {
  const int t = static_cast<int>(state.range(0));
  omp_set_num_threads(t > 0 ? t : omp_get_num_procs());
}

const FeatureSpace& grid_space() {
  static const Gridworld world = generate_gridworld({.n = 32, .seed = 1});
  return world.space;
}

const FeatureSpace& game_space() {
  static const FeatureSpace space = game_feature_space();
  return space;
}

void BM_GridGramReference(benchmark::State& state) {
  const KernelSpec spec{KernelKind::gaussian, 0.6};
  for (auto _ : state) benchmark::DoNotOptimize(gram_matrix_reference(spec, grid_space()));
}

void BM_GridGramParallel(benchmark::State& state) {
  set_threads(state);
  const KernelSpec spec{KernelKind::gaussian, 0.6};
  for (auto _ : state) benchmark::DoNotOptimize(gram_entries(spec, grid_space()));
}

void BM_GameGramReference(benchmark::State& state) {
  const KernelSpec spec{KernelKind::game_gaussian, 0.6};
  for (auto _ : state) benchmark::DoNotOptimize(gram_matrix_reference(spec, game_space()));
}

void BM_GameGramParallel(benchmark::State& state) {
  set_threads(state);
  const KernelSpec spec{KernelKind::game_gaussian, 0.6};
  for (auto _ : state) benchmark::DoNotOptimize(gram_entries(spec, game_space()));
}

struct Rollouts {
  DiscountedMdp<StateIndex> mdp;
  TabularPolicy policy;
};

const Rollouts& rollouts() {
  static const Rollouts r = [] {
    Rng rng(3);
    TabularMdp tab = random_tabular_mdp(64, 5, 0.95, 200, rng);
    return Rollouts{tab.generative(), random_stochastic_policy(64, 5, rng)};
  }();
  return r;
}

void BM_ReturnsReference(benchmark::State& state) {
  const auto& r = rollouts();
  for (auto _ : state) benchmark::DoNotOptimize(episode_returns_reference(r.mdp, r.policy, 2000, 7));
}

void BM_ReturnsParallel(benchmark::State& state) {
  set_threads(state);
  const auto& r = rollouts();
  for (auto _ : state) benchmark::DoNotOptimize(episode_returns(r.mdp, r.policy, 2000, 7));
}

void BM_DeiChain(benchmark::State& state) {
  set_threads(state);
  auto model = tabular_dei_model(make_chain().generative());
  DeiConfig config;
  config.iterations = 3;
  config.episodes = 200;
  for (auto _ : state) benchmark::DoNotOptimize(run_dei(model, config, 11));
}

}  // namespace

BENCHMARK(BM_GridGramReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridGramParallel)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GameGramReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GameGramParallel)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReturnsReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReturnsParallel)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DeiChain)->Arg(1)->Arg(0)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
