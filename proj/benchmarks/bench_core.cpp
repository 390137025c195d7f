#include <benchmark/benchmark.h>

#include "umdqn/agent.hpp"
#include "umdqn/config.hpp"
#include "umdqn/distrib.hpp"
#include "umdqn/env.hpp"
#include "umdqn/umnn.hpp"

namespace {

using namespace umdqn;

UmnnModel bench_model() {
  Rng rng(1);
  return make_umnn_model(6, 128, 128, 32, rng);
}

std::vector<double> bench_features() { return {0.5, 0.5, 1.0, 0.0, 0.0, 0.0}; }

void BM_Conditioning(benchmark::State& state) {
  const UmnnModel model = bench_model();
  const auto feats = bench_features();
  for (auto _ : state) {
    benchmark::DoNotOptimize(condition(model, feats));
  }
}
BENCHMARK(BM_Conditioning);

void BM_UmnnEvalBatch(benchmark::State& state) {
  const UmnnModel model = bench_model();
  const Conditioning cond = condition(model, bench_features());
  Rng rng(2);
  std::vector<double> xs(state.range(0));
  for (double& x : xs) x = rng.uniform(-2.0, 2.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(umnn_eval(model, cond, xs, false));
  }
}
BENCHMARK(BM_UmnnEvalBatch)->Arg(200);

void BM_EvalBackward(benchmark::State& state) {
  UmnnModel model = bench_model();
  const Conditioning cond = condition(model, bench_features());
  Rng rng(3);
  std::vector<double> xs(200), up(200);
  for (double& x : xs) x = rng.uniform(-2.0, 2.0);
  for (double& u : up) u = rng.uniform(-1.0, 1.0);
  const UmnnEval ev = umnn_eval(model, cond, xs, false);
  for (auto _ : state) {
    umnn_eval_backward(model, cond, ev, up, {});
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_EvalBackward);

void BM_Expectation(benchmark::State& state) {
  const UmnnModel model = bench_model();
  const ReturnDomain domain{-2.0, 2.0, 200, 200};
  const ReturnDistributionView view{Representation::Cdf, &model, domain};
  Rng rng(4);
  const auto feats = bench_features();
  for (auto _ : state) {
    benchmark::DoNotOptimize(expectation(view, feats, {201, 256}, rng));
  }
}
BENCHMARK(BM_Expectation);

void BM_TrainStep(benchmark::State& state) {
  const Algo algo = static_cast<Algo>(state.range(0));
  GridWorld env;
  TrainConfig cfg = default_config("gridworld");
  cfg.algo = algo;
  Agent agent(cfg, env);
  Rng rng(5);
  for (int i = 0; i < 256; ++i) {
    Experience e;
    e.s = {rng.uniform(), rng.uniform()};
    e.s_next = {rng.uniform(), rng.uniform()};
    e.a = rng.uniform_int(4);
    e.r = rng.uniform(-1.0, 1.0);
    e.terminal = i % 7 == 0;
    e.s_id = rng.uniform_int(49);
    e.s_next_id = rng.uniform_int(49);
    agent.memory().push(std::move(e));
  }
  for (auto _ : state) {
    const auto batch = agent.sample_batch();
    benchmark::DoNotOptimize(agent.train_step(batch));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Arg(2);

}  // namespace

BENCHMARK_MAIN();
