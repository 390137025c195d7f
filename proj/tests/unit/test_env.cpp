#include <doctest.h>

#include <cmath>
#include <map>

#include "umdqn/env.hpp"
#include "umdqn/errors.hpp"

using namespace umdqn;

TEST_SUITE_BEGIN("env");

TEST_CASE("grid reset lands on non-terminal cells only") {
  GridWorld env;
  Rng rng(1);
  std::map<int, int> counts;
  for (int i = 0; i < 10000; ++i) {
    env.reset(rng);
    const GridCell c = env.cell();
    CHECK(!env.is_terminal_cell(c));
    ++counts[GridWorld::cell_index(c)];
  }
  CHECK(counts.size() == 47);

  // Frequencies within binomial tolerance of 1/47.
  const double p = 1.0 / 47.0;
  const double n = 10000.0;
  const double tol = 3.0 * std::sqrt(p * (1.0 - p) / n);
  for (const auto& [idx, count] : counts) {
    CHECK(std::abs(count / n - p) <= tol);
  }

  // Seeded determinism.
  GridWorld env2;
  Rng ra(9), rb(9);
  for (int i = 0; i < 50; ++i) {
    env.reset(ra);
    env2.reset(rb);
    CHECK(env.cell() == env2.cell());
  }
}

TEST_CASE("grid step mechanics") {
  GridWorld env;
  Rng rng(2);

  // Border clipping: LEFT from x=0 stays in place whatever the move draw.
  for (int i = 0; i < 20; ++i) {
    env.set_cell({0, 3});
    const StepResult res = env.step(GridWorld::kLeft, rng);
    CHECK(env.cell() == GridCell{0, 3});
    CHECK(!res.terminal);
    CHECK(std::abs(res.reward) < 1.0);  // mean-zero noise
  }

  // Landing on the target terminates with reward near +1.
  double acc = 0.0;
  for (int i = 0; i < 2000; ++i) {
    env.set_cell({5, 6});
    const StepResult res = env.step(GridWorld::kRight, rng);  // 1 or 2 both land on (6,6)
    CHECK(res.terminal);
    acc += res.reward;
  }
  CHECK(acc / 2000.0 == doctest::Approx(1.0).epsilon(0.02));

  // Landing on the trap terminates with reward near -1.
  acc = 0.0;
  for (int i = 0; i < 2000; ++i) {
    env.set_cell({3, 4});
    const StepResult res = env.step(GridWorld::kDown, rng);  // may land (3,3) or (3,2)
    if (env.cell() == GridCell{3, 3}) {
      CHECK(res.terminal);
      acc += res.reward;
    } else {
      CHECK(!res.terminal);
    }
  }
  CHECK(acc < 0.0);

  env.set_cell({6, 6});
  CHECK_THROWS_AS(env.step(GridWorld::kUp, rng), UsageError);
}

TEST_CASE("double move frequency and reward noise variance") {
  GridWorld env;
  Rng rng(3);
  int doubles = 0;
  const int n = 10000;
  double sum = 0.0, sum_sq = 0.0;
  int noise_count = 0;
  for (int i = 0; i < n; ++i) {
    env.set_cell({3, 0});  // RIGHT from here never terminates
    env.step(GridWorld::kRight, rng);
    if (env.cell() == GridCell{5, 0}) ++doubles;
  }
  CHECK(std::abs(doubles / static_cast<double>(n) - 0.5) <= 0.015);

  for (int i = 0; i < 100000; ++i) {
    env.set_cell({1, 1});
    const StepResult res = env.step(GridWorld::kRight, rng);
    sum += res.reward;
    sum_sq += res.reward * res.reward;
    ++noise_count;
  }
  const double mean = sum / noise_count;
  const double var = sum_sq / noise_count - mean * mean;
  CHECK(var == doctest::Approx(0.01).epsilon(0.1));
}

TEST_CASE("episodes terminate; cap hits are rare under a random policy") {
  GridWorld env;
  Rng rng(4);
  int cap_hits = 0;
  const int episodes = 10000;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(rng);
    while (true) {
      const StepResult res = env.step(rng.uniform_int(4), rng);
      if (res.terminal) break;
      if (res.truncated) {
        ++cap_hits;
        break;
      }
    }
  }
  CHECK(cap_hits < episodes / 1000);  // < 0.1%
}

TEST_CASE("grid encoding is injective and scaled") {
  GridWorld env;
  CHECK(env.encode({0, 0}) == std::vector<double>{0.0, 0.0});
  CHECK(env.encode({6, 6}) == std::vector<double>{1.0, 1.0});
  std::map<std::pair<double, double>, int> seen;
  for (int idx = 0; idx < 49; ++idx) {
    const auto e = env.encode(GridWorld::cell_from_index(idx));
    ++seen[{e[0], e[1]}];
  }
  CHECK(seen.size() == 49);
}

TEST_CASE("environment evolution depends only on seed and actions") {
  GridWorld a, b;
  Rng ra(5), rb(5);
  a.reset(ra);
  b.reset(rb);
  Rng action_rng(6);
  for (int i = 0; i < 200; ++i) {
    const int act = action_rng.uniform_int(4);
    const StepResult r1 = a.step(act, ra);
    const StepResult r2 = b.step(act, rb);
    CHECK(r1.reward == r2.reward);
    CHECK(r1.terminal == r2.terminal);
    CHECK(a.cell() == b.cell());
    if (r1.terminal || r1.truncated) {
      a.reset(ra);
      b.reset(rb);
    }
  }
}

TEST_CASE("cartpole dynamics and rewards") {
  CartPole env;
  Rng rng(7);

  // Constant one-sided force destabilises the pole from near-zero state.
  env.reset(rng);
  double max_angle = 0.0;
  for (int i = 0; i < 200; ++i) {
    const StepResult res = env.step(1, rng);
    CHECK(res.reward == 1.0);
    max_angle = std::max(max_angle, std::abs(res.obs[2]));
    if (res.terminal) break;
  }
  CHECK(max_angle > 12.0 * M_PI / 180.0 * 0.99);

  // Episode return can never exceed the step cap.
  for (int ep = 0; ep < 20; ++ep) {
    env.reset(rng);
    double ret = 0.0;
    while (true) {
      const StepResult res = env.step(rng.uniform_int(2), rng);
      ret += res.reward;
      if (res.terminal || res.truncated) break;
    }
    CHECK(ret <= 200.0);
  }
}

TEST_CASE("make_env lookup") {
  CHECK(make_env("gridworld")->name() == "gridworld");
  CHECK(make_env("cartpole")->name() == "cartpole");
  CHECK_THROWS_AS(make_env("atari"), ValidationError);
}

TEST_SUITE_END();
