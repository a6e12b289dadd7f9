#include <benchmark/benchmark.h>

#include <random>

#include "pose/config.hpp"
#include "pose/metrics.hpp"
#include "pose/optimization.hpp"
#include "pose/policy.hpp"

using namespace pose;

namespace {

std::vector<Vec> cloud(std::size_t n, Rng& rng) {
  std::normal_distribution<double> N;
  std::vector<Vec> out(n, Vec(2));
  for (auto& v : out) v << N(rng), N(rng);
  return out;
}

Mat observations(std::size_t n, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> N;
  Mat m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = N(rng);
  return m;
}

void BM_MmdMedian(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = cloud(n, rng), y = cloud(n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mmd_squared(x, y, KernelConfig{}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MmdMedian)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void BM_MmdFixed(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = cloud(n, rng), y = cloud(n, rng);
  KernelConfig cfg;
  cfg.bandwidth_mode = BandwidthMode::fixed;
  cfg.fixed_bandwidth = 6.0;
  for (auto _ : state) benchmark::DoNotOptimize(mmd_squared(x, y, cfg));
}
BENCHMARK(BM_MmdFixed)->RangeMultiplier(2)->Range(16, 256);

void BM_PolicyForward(benchmark::State& state) {
  Rng rng(3);
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const PolicyParams p = init_policy(make_architecture(3, {hidden, hidden}, 4, HeadKind::categorical), rng);
  const Mat obs = observations(256, 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_policy(p, obs));
  state.SetItemsProcessed(state.iterations() * obs.rows());
}
BENCHMARK(BM_PolicyForward)->Arg(16)->Arg(64);

void BM_PolicyBackward(benchmark::State& state) {
  Rng rng(4);
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const PolicyParams p = init_policy(make_architecture(3, {hidden, hidden}, 4, HeadKind::categorical), rng);
  const Mat obs = observations(256, 3, rng);
  const Vec w = Vec::Ones(obs.rows());
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradient(p, obs, [&](const PolicyBatch& b, HeadGradient& g) {
      add_entropy_grad(b, w, g);
      return entropies(b).sum();
    }));
  }
  state.SetItemsProcessed(state.iterations() * obs.rows());
}
BENCHMARK(BM_PolicyBackward)->Arg(16)->Arg(64);

void BM_FisherVectorProduct(benchmark::State& state) {
  Rng rng(5);
  const auto hidden = static_cast<std::size_t>(state.range(0));
  const PolicyParams p = init_policy(make_architecture(2, {hidden, hidden}, 2, HeadKind::gaussian), rng);
  const Mat obs = observations(256, 2, rng);
  const Vec v = Vec::Ones(p.theta.size());
  for (auto _ : state) benchmark::DoNotOptimize(fisher_vector_product(p, obs, v, 0.1));
}
BENCHMARK(BM_FisherVectorProduct)->Arg(16)->Arg(64);

void BM_EnvStep(benchmark::State& state, const char* name) {
  EnvConfig e;
  e.name = name;
  auto env = make_environment(e);
  Rng rng(6);
  const bool discrete = env->action_space().is_discrete();
  std::uniform_int_distribution<int> pick(0, 3);
  std::normal_distribution<double> N;
  env->reset(0);
  for (auto _ : state) {
    const Action a = discrete ? Action::discrete(pick(rng)) : Action::continuous(Vec::Constant(2, N(rng)));
    if (env->step(a).done) env->reset(0);
  }
}
BENCHMARK_CAPTURE(BM_EnvStep, grid, "kdt21");
BENCHMARK_CAPTURE(BM_EnvStep, point, "point-u");

}  // namespace

// The packaged benchmark_main archive is LTO bytecode, so provide main here.
BENCHMARK_MAIN();
