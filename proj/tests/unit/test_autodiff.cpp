#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "umdqn/autodiff.hpp"
#include "umdqn/errors.hpp"
#include "umdqn/fastmath.hpp"

using namespace umdqn;

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("fast_exp matches libm") {
  for (double x = -700.0; x <= 700.0; x += 0.37) {
    const double a = fast_exp(x);
    const double b = std::exp(x);
    CHECK(std::abs(a - b) <= 1e-13 * b);
  }
  CHECK(fast_exp(0.0) == doctest::Approx(1.0));
}

TEST_CASE("xavier_init bounds and determinism") {
  Rng rng(7);
  const Parameter p = xavier_init("w", 1, 1, rng);
  const double bound1 = std::sqrt(3.0);
  CHECK(std::abs(p.value.data[0]) <= bound1);
  CHECK(p.grad.data[0] == 0.0);

  Rng rng_a(3), rng_b(3);
  const Parameter a = xavier_init("w", 128, 4, rng_a);
  const Parameter b = xavier_init("w", 128, 4, rng_b);
  const double bound = std::sqrt(6.0 / 132.0);
  for (std::size_t i = 0; i < a.value.size(); ++i) {
    CHECK(std::abs(a.value.data[i]) <= bound);
    CHECK(a.value.data[i] == b.value.data[i]);
  }
  CHECK_THROWS_AS(xavier_init("bad", 0, 3, rng), DimensionError);
}

TEST_CASE("forward identity and relu layers") {
  Rng rng(1);
  const int widths[] = {3, 3};
  const Activation id[] = {Activation::Identity};
  Mlp mlp = make_mlp("m", widths, id, rng);
  // W = I, b = 0.
  for (Parameter* p : mlp.parameters()) p->value.fill(0.0);
  for (int i = 0; i < 3; ++i) mlp.layers[0].weight.value(i, i) = 1.0;
  const double x[] = {0.3, -0.7, 2.0};
  const auto y = forward(mlp, x);
  for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(x[i]));

  mlp.layers[0].act = Activation::Relu;
  const double neg[] = {-1.0, -0.5, -2.0};
  for (double v : forward(mlp, neg)) CHECK(v == 0.0);

  const double bad_width[] = {1.0, 2.0};
  CHECK_THROWS_AS(forward(mlp, bad_width), DimensionError);
  const double non_finite[] = {1.0, std::nan(""), 0.0};
  CHECK_THROWS_AS(forward(mlp, non_finite), NumericError);
  CHECK_THROWS_AS(backward(mlp, ForwardRecord{}, x), UsageError);
}

TEST_CASE("forward perturbation matches jacobian action") {
  Rng rng(11);
  const int widths[] = {4, 8, 3};
  const Activation acts[] = {Activation::Elu, Activation::Identity};
  Mlp mlp = make_mlp("m", widths, acts, rng);
  std::vector<double> x = {0.2, -0.4, 0.9, 0.1};

  // Jacobian row extraction via backward, then compare against a finite
  // perturbation along each basis vector.
  const double eps = 1e-6;
  for (int i = 0; i < 4; ++i) {
    ForwardRecord rec;
    const auto y0 = forward(mlp, x, &rec);
    std::vector<double> xp = x;
    xp[i] += eps;
    const auto y1 = forward(mlp, xp);
    for (int r = 0; r < 3; ++r) {
      std::vector<double> up(3, 0.0);
      up[r] = 1.0;
      zero_grads(std::vector<Parameter*>(mlp.parameters()));
      const auto dx = backward(mlp, rec, up);
      const double fd = (y1[r] - y0[r]) / eps;
      CHECK(std::abs(dx[i] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("backward matches finite differences on a random network") {
  Rng rng(23);
  const int widths[] = {5, 16, 16, 1};
  const Activation acts[] = {Activation::Elu, Activation::Relu, Activation::Identity};
  Mlp mlp = make_mlp("m", widths, acts, rng);
  std::vector<double> x(5);
  for (double& v : x) v = rng.uniform(-1.0, 1.0);

  const auto params = mlp.parameters();
  const auto loss = [&]() { return forward(mlp, x)[0]; };
  const auto fd = test::fd_gradients(params, loss);

  zero_grads(std::span<Parameter* const>(params));
  ForwardRecord rec;
  forward(mlp, x, &rec);
  backward(mlp, rec, std::vector<double>{1.0});
  CHECK(test::max_grad_rel_error(params, fd) <= 1e-4);
}

TEST_CASE("backward accumulates") {
  Rng rng(5);
  const int widths[] = {2, 4, 1};
  const Activation acts[] = {Activation::Relu, Activation::Identity};
  Mlp mlp = make_mlp("m", widths, acts, rng);
  const double x[] = {0.5, -0.25};
  ForwardRecord rec;
  forward(mlp, x, &rec);
  const std::vector<double> up{1.0};
  backward(mlp, rec, up);
  const Matrix once = mlp.layers[0].weight.grad;
  backward(mlp, rec, up);
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(mlp.layers[0].weight.grad.data[i] == doctest::Approx(2.0 * once.data[i]));
  }
}

TEST_CASE("adam zero gradient is a value no-op") {
  Rng rng(2);
  Parameter p = xavier_init("p", 3, 3, rng);
  const Matrix before = p.value;
  AdamState state;
  std::vector<Parameter*> params{&p};
  adam_step(params, state, 1e-3, 1e-8);
  CHECK(state.step == 1);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(p.value.data[i] == before.data[i]);
}

TEST_CASE("adam single step matches the hand-evaluated recurrences") {
  Parameter p("p", 1, 1);
  p.value.data[0] = 0.7;
  p.grad.data[0] = 0.3;
  AdamState state;
  std::vector<Parameter*> params{&p};
  const double lr = 1e-2, eps = 1e-8;
  adam_step(params, state, lr, eps);
  // m = 0.1 g, v = 0.001 g^2; bias-corrected both equal g and g^2, so the
  // update is lr * g / (|g| + eps).
  const double expected = 0.7 - lr * 0.3 / (std::sqrt(0.3 * 0.3) + eps);
  CHECK(p.value.data[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(p.grad.data[0] == 0.0);
  CHECK(state.step == 1);
}

TEST_CASE("adam descends against a constant gradient") {
  Parameter p("p", 1, 1);
  p.value.data[0] = 0.0;
  AdamState state;
  std::vector<Parameter*> params{&p};
  for (int i = 0; i < 50; ++i) {
    p.grad.data[0] = 2.5;
    adam_step(params, state, 1e-3, 1e-8);
  }
  CHECK(p.value.data[0] < 0.0);

  p.grad.data[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adam_step(params, state, 1e-3, 1e-8), NumericError);
}

TEST_CASE("clip_grad_norm rescales only above the cap") {
  Parameter p("p", 1, 2);
  std::vector<Parameter*> params{&p};

  p.grad.data = {0.3, 0.4};  // norm 0.5
  clip_grad_norm(params, 1.0);
  CHECK(p.grad.data[0] == doctest::Approx(0.3));
  CHECK(p.grad.data[1] == doctest::Approx(0.4));

  p.grad.data = {0.0, 4.0};  // norm 4
  clip_grad_norm(params, 1.0);
  CHECK(p.grad.data[1] == doctest::Approx(1.0));

  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    Parameter q("q", 4, 4);
    for (double& g : q.grad.data) g = rng.normal(0.0, 3.0);
    std::vector<Parameter*> qs{&q};
    const Parameter before = q;
    clip_grad_norm(qs, 1.0);
    double norm = 0.0;
    for (double g : q.grad.data) norm += g * g;
    CHECK(std::sqrt(norm) <= 1.0 + 1e-12);
    // Direction preserved: the clipped gradient is a positive multiple.
    for (std::size_t i = 1; i < q.grad.data.size(); ++i) {
      if (before.grad.data[0] != 0.0 && before.grad.data[i] != 0.0) {
        CHECK(q.grad.data[i] * before.grad.data[0] ==
              doctest::Approx(q.grad.data[0] * before.grad.data[i]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("deterministic parameter evolution under a fixed op sequence") {
  const auto run = [] {
    Rng rng(99);
    const int widths[] = {3, 8, 1};
    const Activation acts[] = {Activation::Elu, Activation::Identity};
    Mlp mlp = make_mlp("m", widths, acts, rng);
    AdamState state;
    const auto params = mlp.parameters();
    for (int step = 0; step < 20; ++step) {
      const double x[] = {0.1 * step, -0.2, 0.5};
      ForwardRecord rec;
      forward(mlp, x, &rec);
      backward(mlp, rec, std::vector<double>{1.0});
      clip_grad_norm(std::span<Parameter* const>(params), 1.0);
      adam_step(std::span<Parameter* const>(params), state, 1e-3, 1e-8);
    }
    return mlp.layers[0].weight.value.data;
  };
  const auto a = run();
  const auto b = run();
  CHECK(a == b);  // bitwise
}

TEST_SUITE_END();
