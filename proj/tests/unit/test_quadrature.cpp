#include <doctest.h>

#include <cmath>

#include "umdqn/errors.hpp"
#include "umdqn/quadrature.hpp"

using namespace umdqn;

namespace {

BatchFn scalar_fn(double (*f)(double)) {
  return [f](std::span<const double> ts, std::span<double> out) {
    for (std::size_t i = 0; i < ts.size(); ++i) out[i] = f(ts[i]);
  };
}

}  // namespace

TEST_SUITE_BEGIN("quadrature");

TEST_CASE("rule weights sum to the interval length") {
  for (int n : {2, 3, 5, 8, 16, 32, 64}) {
    const auto rule = ClenshawCurtisRule::make(n);
    double sum = 0.0;
    for (double w : rule.weights) {
      CHECK(w > 0.0);
      sum += w;
    }
    CHECK(sum == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(rule.nodes.front() == doctest::Approx(-1.0));
    CHECK(rule.nodes.back() == doctest::Approx(1.0));
    for (std::size_t i = 1; i < rule.nodes.size(); ++i) CHECK(rule.nodes[i] > rule.nodes[i - 1]);
  }
}

TEST_CASE("polynomials below the node count integrate exactly") {
  const auto rule = ClenshawCurtisRule::make(32);
  for (int degree = 0; degree < 32; ++degree) {
    const BatchFn f = [degree](std::span<const double> ts, std::span<double> out) {
      for (std::size_t i = 0; i < ts.size(); ++i) out[i] = std::pow(ts[i], degree);
    };
    const double got = clenshaw_curtis(f, -1.0, 1.0, rule);
    const double expected = degree % 2 == 1 ? 0.0 : 2.0 / (degree + 1);
    CHECK(std::abs(got - expected) <= 1e-12);
  }
}

TEST_CASE("constant and linear integrands") {
  const auto rule = ClenshawCurtisRule::make(8);
  const double c = clenshaw_curtis(scalar_fn(+[](double) { return 1.0; }), 0.0, 0.7, rule);
  CHECK(c == doctest::Approx(0.7).epsilon(1e-14));
  const double lin = clenshaw_curtis(scalar_fn(+[](double t) { return t; }), 0.0, 1.0, rule);
  CHECK(lin == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("exponential integrand converges") {
  const auto rule16 = ClenshawCurtisRule::make(16);
  const double got = clenshaw_curtis(scalar_fn(+[](double t) { return std::exp(t); }), 0.0, 1.0,
                                     rule16);
  CHECK(std::abs(got - (M_E - 1.0)) <= 1e-9);

  const auto rule32 = ClenshawCurtisRule::make(32);
  const double got32 = clenshaw_curtis(scalar_fn(+[](double t) { return std::exp(t); }), 0.0,
                                       1.0, rule32);
  CHECK(std::abs(got32 - (M_E - 1.0)) <= 1e-12);
}

TEST_CASE("errors") {
  const auto rule = ClenshawCurtisRule::make(8);
  CHECK_THROWS_AS(clenshaw_curtis(scalar_fn(+[](double) { return 1.0; }), 1.0, 0.0, rule),
                  DomainError);
  const BatchFn bad = [](std::span<const double>, std::span<double> out) {
    out[0] = std::nan("");
  };
  CHECK_THROWS_AS(clenshaw_curtis(bad, 0.0, 1.0, rule), NumericError);
  CHECK(clenshaw_curtis(scalar_fn(+[](double) { return 5.0; }), 2.0, 2.0, rule) == 0.0);
}

TEST_CASE("chebyshev transform reconstructs sampled functions") {
  const int n = 24;
  const auto& ops = ChebyshevOps::cached(n);
  const auto rule = ClenshawCurtisRule::make(n);
  const auto f = [](double x) { return std::sin(2.0 * x) + 0.3 * x * x; };

  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) vals[i] = f(rule.nodes[i]);
  std::vector<double> coeffs(n, 0.0);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) coeffs[k] += ops.vals_to_coeffs(k, j) * vals[j];
  }
  // Interpolation at the nodes and off-node points.
  for (double x : {-1.0, -0.77, -0.2, 0.0, 0.33, 0.9, 1.0}) {
    CHECK(cheb_eval(coeffs, x) == doctest::Approx(f(x)).epsilon(1e-10));
  }
}

TEST_CASE("antiderivative map integrates chebyshev series") {
  const int n = 16;
  const auto& ops = ChebyshevOps::cached(n);
  // f(x) = sin(x): coefficients from the transform, antiderivative should
  // reproduce -cos up to a constant.
  const auto rule = ClenshawCurtisRule::make(n);
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) vals[i] = std::sin(rule.nodes[i]);
  std::vector<double> a(n, 0.0);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) a[k] += ops.vals_to_coeffs(k, j) * vals[j];
  }
  std::vector<double> b(n + 1, 0.0);
  for (int k = 0; k <= n; ++k) {
    for (int j = 0; j < n; ++j) b[k] += ops.antiderivative(k, j) * a[j];
  }
  for (double x : {-0.9, -0.4, 0.1, 0.66, 1.0}) {
    const double got = cheb_eval(b, x) - cheb_eval(b, -1.0);
    const double expected = -std::cos(x) + std::cos(-1.0);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("cheb_basis matches the recurrence definition") {
  std::vector<double> basis(6);
  cheb_basis(0.3, basis);
  CHECK(basis[0] == 1.0);
  CHECK(basis[1] == doctest::Approx(0.3));
  for (int k = 2; k < 6; ++k) {
    CHECK(basis[k] == doctest::Approx(2.0 * 0.3 * basis[k - 1] - basis[k - 2]));
  }
}

TEST_SUITE_END();
