#include <benchmark/benchmark.h>

#include "df2/baselines.hpp"
#include "df2/episim.hpp"
#include "df2/surrogate.hpp"

namespace {

using namespace df2;

AttentionSurrogate make_model(int points) {
  auto obj = std::make_shared<Objective>(Objective::synthetic_convex(2));
  AttentionSurrogate m = AttentionSurrogate::make(2, obj, points, 16, 128, 7);
  Rng rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Eigen::Index i = 0; i < m.values.size(); ++i) m.values.data()[i] = nd(rng);
  return m;
}

void BM_SurrogateValue(benchmark::State& state) {
  const AttentionSurrogate m = make_model(static_cast<int>(state.range(0)));
  const Vec x = Vec::Constant(2, 0.3);
  const Vec w = attention_weights(m, x);
  Vec a = Vec::Constant(2, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(g_from_weights(m, w, a));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SurrogateValue)->Arg(100)->Arg(1000);

void BM_PairLossWithGrad(benchmark::State& state) {
  const AttentionSurrogate m = make_model(static_cast<int>(state.range(0)));
  const Vec x = Vec::Constant(2, 0.3);
  const Vec y = Vec::Constant(2, 0.5);
  Rng rng(5);
  const Mat actions = sample_feasible(m.objective->feasible(), 100, rng);
  SurrogateGrad grad = SurrogateGrad::zeros_like(m);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pair_loss(m, x, y, actions, &grad));
  }
}
BENCHMARK(BM_PairLossWithGrad)->Arg(200)->Arg(1000);

void BM_SaaDecide(benchmark::State& state) {
  const Objective obj = Objective::synthetic_convex(2);
  Rng rng(11);
  std::normal_distribution<double> nd(0.0, 0.5);
  Mat Y(100, 2);
  for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = nd(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(saa_decide_samples(Y, obj, {0.01, 500}));
  }
}
BENCHMARK(BM_SaaDecide);

void BM_SeirvSimulation(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  SeirvParams p;
  p.beta = Vec::Constant(K, 0.3);
  p.sigma = Vec::Constant(K, 0.2);
  p.gamma = Vec::Constant(K, 0.1);
  p.population = Vec::Constant(K, 1e6);
  p.horizon_days = 14;
  SeirvState init = SeirvState::susceptible(p.population);
  init.I = Vec::Constant(K, 1e3);
  init.S = p.population - init.I;
  OdTensor od(K, 7, Vec::Constant(static_cast<Eigen::Index>(K) * K * 7, 1e3));
  const Vec a = Vec::Constant(K, 1e4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_seirv(od, a, p, init).new_infections);
  }
}
BENCHMARK(BM_SeirvSimulation)->Arg(5)->Arg(47);

}  // namespace
BENCHMARK_MAIN();
