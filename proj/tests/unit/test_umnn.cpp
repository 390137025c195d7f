#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "umdqn/errors.hpp"
#include "umdqn/fastmath.hpp"
#include "umdqn/umnn.hpp"

using namespace umdqn;

namespace {

std::vector<double> random_features(int n, Rng& rng) {
  std::vector<double> f(n);
  for (double& v : f) v = rng.uniform(0.0, 1.0);
  return f;
}

}  // namespace

TEST_SUITE_BEGIN("umnn");

TEST_CASE("frozen unit integrand gives the identity map") {
  UmnnModel model = test::small_model(3, 8, 32, 42);
  test::freeze_constant(model, 1.0, 0.0);
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const auto feats = random_features(3, rng);
    const Conditioning cond = condition(model, feats);
    for (double x : {-2.0, -0.3, 0.0, 0.5, 1.7}) {
      CHECK(umnn_forward(model, cond, x) == doctest::Approx(x).epsilon(1e-9));
    }
  }
}

TEST_CASE("frozen scaled integrand with offset") {
  UmnnModel model = test::small_model(2, 8, 32, 42);
  test::freeze_constant(model, 2.0, 0.3);
  const Conditioning cond = condition(model, std::vector<double>{0.1, 0.9});
  CHECK(umnn_forward(model, cond, 0.5) == doctest::Approx(1.3).epsilon(1e-9));
}

TEST_CASE("strict monotonicity over random parameters") {
  Rng rng(77);
  for (int m = 0; m < 20; ++m) {
    UmnnModel model = test::small_model(4, 8, 32, 1000 + m);
    const auto feats = random_features(4, rng);
    const Conditioning cond = condition(model, feats);
    for (int pair = 0; pair < 50; ++pair) {
      double x1 = rng.uniform(-3.0, 3.0);
      double x2 = rng.uniform(-3.0, 3.0);
      if (x1 > x2) std::swap(x1, x2);
      if (x2 - x1 < 1e-3) continue;
      CHECK(umnn_forward(model, cond, x2) > umnn_forward(model, cond, x1));
    }
  }
}

TEST_CASE("single-point evaluation equals the explicit quadrature sum") {
  UmnnModel model = test::small_model(3, 8, 32, 5);
  Rng rng(5);
  const auto feats = random_features(3, rng);
  const Conditioning cond = condition(model, feats);
  const auto rule = ClenshawCurtisRule::make(model.n_cc);
  for (double x : {0.8, 2.5, -1.2}) {
    const double lo = std::min(0.0, x);
    const double hi = std::max(0.0, x);
    std::vector<double> ts(rule.count);
    for (int i = 0; i < rule.count; ++i) {
      ts[i] = 0.5 * (hi + lo) + 0.5 * (hi - lo) * rule.nodes[i];
    }
    const auto gv = integrand_values(model, cond, ts);
    double acc = 0.0;
    for (int i = 0; i < rule.count; ++i) acc += rule.weights[i] * gv[i];
    const double expected = (x >= 0.0 ? 1.0 : -1.0) * 0.5 * (hi - lo) * acc + cond.beta;
    CHECK(umnn_forward(model, cond, x) == doctest::Approx(expected).epsilon(1e-11));
  }
}

TEST_CASE("batched evaluation agrees with per-point quadrature") {
  // The elu hidden activation is C1 only, so the quadrature error of both
  // paths is algebraic on generic networks; they agree to the quadrature
  // resolution, not to machine precision.
  UmnnModel model = test::small_model(3, 8, 32, 9);
  Rng rng(9);
  const auto feats = random_features(3, rng);
  const Conditioning cond = condition(model, feats);
  std::vector<double> xs(40);
  for (double& x : xs) x = rng.uniform(-2.5, 2.5);
  const UmnnEval ev = umnn_eval(model, cond, xs, true);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(ev.G[i] == doctest::Approx(umnn_forward(model, cond, xs[i])).epsilon(1e-3));
    const double g_exact = integrand_values(model, cond, std::vector<double>{xs[i]})[0];
    CHECK(ev.gx[i] == doctest::Approx(g_exact).epsilon(1e-3));
  }

  // On a kink-free network (all hidden pre-activations keep one sign over
  // the interval) the integrand is analytic and the two paths coincide to
  // quadrature-converged precision.
  UmnnModel smooth = test::small_model(3, 8, 32, 10);
  for (double& b : smooth.integrand.layers[0].bias.value.data) b = 4.0;
  const Conditioning sc = condition(smooth, feats);
  const UmnnEval sev = umnn_eval(smooth, sc, xs, true);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(sev.G[i] == doctest::Approx(umnn_forward(smooth, sc, xs[i])).epsilon(1e-10));
  }
}

TEST_CASE("offset gradient is one and dG/dx is the integrand") {
  UmnnModel model = test::small_model(3, 8, 32, 13);
  Rng rng(13);
  const auto feats = random_features(3, rng);
  for (double x : {0.7, -1.1}) {
    UmnnRecord rec = umnn_forward_record(model, feats, x);
    // dG/dbeta: perturb the offset bias and compare.
    auto params = model.parameters();
    zero_grads(std::span<Parameter* const>(params));
    umnn_backward(model, rec, 1.0);
    CHECK(model.offset.layers[0].bias.grad.data[0] == doctest::Approx(1.0).epsilon(1e-12));

    const double g_at_x = integrand_values(model, rec.cond, std::vector<double>{x})[0];
    CHECK(umnn_grad_x(rec) == doctest::Approx(g_at_x).epsilon(1e-8));
  }
}

TEST_CASE("parameter gradients match finite differences") {
  UmnnModel model = test::small_model(3, 6, 16, 21);
  Rng rng(21);
  const auto feats = random_features(3, rng);
  std::vector<double> xs = {-1.3, -0.2, 0.4, 1.9};
  const auto params = model.parameters();

  // Scalar loss: weighted sum of G values plus weighted sum of integrand
  // values, exercising both output paths.
  std::vector<double> wG = {0.7, -1.1, 0.4, 0.9};
  std::vector<double> wg = {0.2, 0.5, -0.8, 0.1};
  const auto loss = [&]() {
    const Conditioning cond = condition(model, feats);
    const UmnnEval ev = umnn_eval(model, cond, xs, true);
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) acc += wG[i] * ev.G[i] + wg[i] * ev.gx[i];
    return acc;
  };
  const auto fd = test::fd_gradients(params, loss);

  zero_grads(std::span<Parameter* const>(params));
  const Conditioning cond = condition(model, feats);
  const UmnnEval ev = umnn_eval(model, cond, xs, true);
  umnn_eval_backward(model, cond, ev, wG, wg);
  CHECK(test::max_grad_rel_error(params, fd) <= 1e-4);
}

TEST_CASE("cdf head") {
  UmnnModel model = test::small_model(2, 8, 32, 30);
  test::freeze_constant(model, 1.0, 0.0);
  const Conditioning cond = condition(model, std::vector<double>{0.4, 0.6});
  CHECK(cdf_eval(model, cond, 0.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(cdf_eval(model, cond, 20.0) >= 1.0 - 1e-8);
  CHECK(cdf_eval(model, cond, -20.0) <= 1e-8);

  // Nondecreasing over a sorted grid with random parameters.
  UmnnModel rnd = test::small_model(2, 8, 32, 31);
  const Conditioning rc = condition(rnd, std::vector<double>{0.2, 0.8});
  double prev = -1.0;
  for (int i = 0; i <= 200; ++i) {
    const double z = -4.0 + 8.0 * i / 200.0;
    const double f = cdf_eval(rnd, rc, z);
    CHECK(f > 0.0);
    CHECK(f < 1.0);
    CHECK(f >= prev);
    prev = f;
  }
}

TEST_CASE("pdf head: logistic density value and nonnegativity") {
  UmnnModel model = test::small_model(2, 8, 32, 33);
  test::freeze_constant(model, 1.0, 0.0);
  const Conditioning cond = condition(model, std::vector<double>{0.3, 0.3});
  CHECK(pdf_eval(model, cond, 0.0) == doctest::Approx(0.25).epsilon(1e-9));

  UmnnModel rnd = test::small_model(2, 8, 32, 34);
  const Conditioning rc = condition(rnd, std::vector<double>{0.9, 0.1});
  for (double z = -5.0; z <= 5.0; z += 0.25) CHECK(pdf_eval(rnd, rc, z) >= 0.0);
}

TEST_CASE("pdf equals the numerical derivative of the cdf") {
  UmnnModel model = test::small_model(3, 8, 32, 35);
  Rng rng(35);
  const auto feats = random_features(3, rng);
  const Conditioning cond = condition(model, feats);
  const double h = 1e-5;
  for (double z : {-2.0, -0.5, 0.0, 0.8, 2.2}) {
    const double fd = (cdf_eval(model, cond, z + h) - cdf_eval(model, cond, z - h)) / (2.0 * h);
    CHECK(std::abs(pdf_eval(model, cond, z) - fd) <= 1e-5);
  }
}

TEST_CASE("flow density normalises to one") {
  for (int m = 0; m < 5; ++m) {
    UmnnModel model = test::small_model(3, 8, 32, 50 + m);
    Rng rng(50 + m);
    const auto feats = random_features(3, rng);
    const Conditioning cond = condition(model, feats);
    // Expand the window until the cdf covers [1e-4, 1 - 1e-4].
    double L = 1.0;
    while (cdf_eval(model, cond, -L) > 1e-4 || cdf_eval(model, cond, L) < 1.0 - 1e-4) {
      L *= 2.0;
      REQUIRE(L < 1e6);
    }
    const int n = 2001;
    const double h = 2.0 * L / (n - 1);
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = -L + h * i;
      const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      integral += w * pdf_eval(model, cond, z);
    }
    integral *= h / 3.0;
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("qf head") {
  UmnnModel model = test::small_model(2, 8, 32, 60);
  test::freeze_constant(model, 1.0, 0.0);
  const Conditioning cond = condition(model, std::vector<double>{0.5, 0.5});
  CHECK(qf_eval(model, cond, 0.25) == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(qf_eval(model, cond, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(qf_eval(model, cond, 1.5), DomainError);
  CHECK_THROWS_AS(qf_eval(model, cond, -0.1), DomainError);

  UmnnModel rnd = test::small_model(2, 8, 32, 61);
  const Conditioning rc = condition(rnd, std::vector<double>{0.2, 0.7});
  // tau = 0 reduces to the offset.
  CHECK(qf_eval(rnd, rc, 0.0) == doctest::Approx(rc.beta).epsilon(1e-12));
  Rng rng(61);
  for (int pair = 0; pair < 200; ++pair) {
    double t1 = rng.uniform();
    double t2 = rng.uniform();
    if (t1 > t2) std::swap(t1, t2);
    if (t2 - t1 < 1e-4) continue;
    CHECK(qf_eval(rnd, rc, t2) > qf_eval(rnd, rc, t1));
  }
}

TEST_CASE("inversion") {
  UmnnModel ident = test::small_model(2, 8, 32, 70);
  test::freeze_constant(ident, 1.0, 0.0);
  const Conditioning ci = condition(ident, std::vector<double>{0.1, 0.1});
  CHECK(umnn_invert(ident, ci, 0.4, 1e-9) == doctest::Approx(0.4).epsilon(1e-7));

  UmnnModel affine = test::small_model(2, 8, 32, 71);
  test::freeze_constant(affine, 2.0, 0.3);
  const Conditioning ca = condition(affine, std::vector<double>{0.1, 0.1});
  CHECK(umnn_invert(affine, ca, 1.3, 1e-9) == doctest::Approx(0.5).epsilon(1e-7));

  UmnnModel rnd = test::small_model(2, 8, 32, 72);
  const Conditioning cr = condition(rnd, std::vector<double>{0.6, 0.4});
  Rng rng(72);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = rng.uniform(-3.0, 3.0);
    const double y = umnn_forward(rnd, cr, x);
    const double back = umnn_invert(rnd, cr, y, 1e-10);
    CHECK(std::abs(umnn_forward(rnd, cr, back) - y) <= 1e-10);
    CHECK(back == doctest::Approx(x).epsilon(1e-5));
  }
}

TEST_CASE("quadrature convergence in the node count") {
  Rng rng(80);
  for (int m = 0; m < 3; ++m) {
    // Smooth regime: kink-free integrands converge past 1e-8 when the node
    // count doubles.
    UmnnModel model = test::small_model(3, 8, 32, 90 + m);
    for (double& b : model.integrand.layers[0].bias.value.data) b += 5.0;
    const auto feats = random_features(3, rng);
    const Conditioning c32 = condition(model, feats);
    UmnnModel wide = model.clone();
    wide.n_cc = 64;
    const Conditioning c64 = condition(wide, feats);
    for (double x : {0.7, -1.9, 2.4}) {
      const double a = umnn_forward(model, c32, x);
      const double b = umnn_forward(wide, c64, x);
      CHECK(std::abs(a - b) <= 1e-8);
    }

    // Generic networks carry elu C2 kinks; convergence is algebraic but
    // still tight at training scale.
    UmnnModel generic = test::small_model(3, 8, 32, 190 + m);
    const Conditioning g32 = condition(generic, feats);
    UmnnModel generic_wide = generic.clone();
    generic_wide.n_cc = 64;
    const Conditioning g64 = condition(generic_wide, feats);
    for (double x : {0.7, -1.9, 2.4}) {
      CHECK(std::abs(umnn_forward(generic, g32, x) - umnn_forward(generic_wide, g64, x)) <=
            1e-4);
    }
  }
}

TEST_CASE("errors and degenerate cases") {
  UmnnModel model = test::small_model(2, 4, 16, 95);
  const Conditioning cond = condition(model, std::vector<double>{0.5, 0.5});
  const double bad[] = {std::nan("")};
  CHECK_THROWS_AS(umnn_eval(model, cond, bad, false), NumericError);
  // All points at zero: the empty integral reduces to the offset.
  const double zeros[] = {0.0, 0.0};
  const UmnnEval ev = umnn_eval(model, cond, zeros, true);
  CHECK(ev.G[0] == doctest::Approx(cond.beta));
  CHECK(ev.G[1] == doctest::Approx(cond.beta));
  CHECK(ev.gx[0] > 0.0);
}

TEST_SUITE_END();
