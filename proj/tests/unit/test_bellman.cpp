#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "umdqn/bellman.hpp"
#include "umdqn/errors.hpp"
#include "umdqn/fastmath.hpp"

using namespace umdqn;

namespace {

/// QF model whose expectation per action equals a chosen constant: a
/// near-floor integrand plus an offset head that reads the action one-hot.
UmnnModel action_value_model(std::span<const double> values, int obs_width) {
  const int n_actions = static_cast<int>(values.size());
  const int f = obs_width + n_actions;
  Rng rng(1);
  UmnnModel model = make_umnn_model(f, f, 4, 32, rng);
  // Embedding: identity pass-through (inputs are nonnegative, relu is
  // transparent).
  for (Parameter* p : model.embedding.parameters()) p->value.fill(0.0);
  for (int i = 0; i < f; ++i) model.embedding.layers[0].weight.value(i, i) = 1.0;
  test::freeze_constant(model, 1e-6, 0.0);
  for (int a = 0; a < n_actions; ++a) {
    model.offset.layers[0].weight.value(0, obs_width + a) = values[a];
  }
  return model;
}

}  // namespace

TEST_SUITE_BEGIN("bellman");

TEST_CASE("next_action maximises the target expectation") {
  const std::vector<double> values = {0.1, 0.5, 0.2, 0.3};
  UmnnModel model = action_value_model(values, 2);
  const ReturnDomain domain{-2.0, 2.0, 200, 200};
  const ReturnDistributionView view{Representation::Qf, &model, domain};
  Rng rng(2);
  const std::vector<double> obs = {0.3, 0.4};
  CHECK(next_action(view, obs, 4, {201, 256}, rng) == 1);

  // All equal: tie broken toward the lowest index.
  const std::vector<double> flat_values = {0.4, 0.4, 0.4, 0.4};
  UmnnModel flat = action_value_model(flat_values, 2);
  const ReturnDistributionView vflat{Representation::Qf, &flat, domain};
  CHECK(next_action(vflat, obs, 4, {201, 256}, rng) == 0);

  // Adding a constant to every action leaves the argmax unchanged.
  const std::vector<double> shifted_values = {1.1, 1.5, 1.2, 1.3};
  UmnnModel shifted = action_value_model(shifted_values, 2);
  const ReturnDistributionView vshift{Representation::Qf, &shifted, domain};
  CHECK(next_action(vshift, obs, 4, {201, 256}, rng) == 1);
}

TEST_CASE("operator target for the qf representation") {
  UmnnModel model = test::small_model(3, 8, 32, 3);
  test::freeze_constant(model, 1e-6, 2.0);  // QF == 2
  const ReturnDomain domain{-2.0, 2.0, 200, 200};
  const ReturnDistributionView view{Representation::Qf, &model, domain};
  const Conditioning cond = condition(model, std::vector<double>{0.1, 0.2, 0.3});
  CHECK(operator_target(view, cond, 1.0, 0.5, 0.7) == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("operator target for the cdf representation") {
  UmnnModel model = test::small_model(2, 8, 32, 4);
  test::freeze_constant(model, 1.0, 0.0);  // F(z) = sigma(z)
  const ReturnDomain domain{-2.0, 2.0, 200, 200};
  const ReturnDistributionView view{Representation::Cdf, &model, domain};
  const Conditioning cond = condition(model, std::vector<double>{0.5, 0.5});
  // (0.7 - 0.2) / 0.5 = 1.0
  CHECK(operator_target(view, cond, 0.2, 0.5, 0.7) ==
        doctest::Approx(sigmoid(1.0)).epsilon(1e-9));
  CHECK_THROWS_AS(operator_target(view, cond, 0.2, 0.0, 0.7), DomainError);
}

TEST_CASE("operator target for the pdf representation") {
  UmnnModel model = test::small_model(2, 8, 32, 5);
  test::freeze_constant(model, 1.0, 0.0);  // p(z) = sigma'(z)
  const ReturnDomain domain{-2.0, 2.0, 200, 200};
  const ReturnDistributionView view{Representation::Pdf, &model, domain};
  const Conditioning cond = condition(model, std::vector<double>{0.5, 0.5});
  // y(z) = 2 p(2 z) at r = 0, gamma = 0.5.
  for (double z : {-0.4, 0.0, 0.3}) {
    CHECK(operator_target(view, cond, 0.0, 0.5, z) ==
          doctest::Approx(2.0 * sigmoid_deriv(2.0 * z)).epsilon(1e-9));
  }
}

TEST_CASE("cdf operator output is nondecreasing in z") {
  UmnnModel model = test::small_model(3, 8, 32, 6);
  const ReturnDomain domain{-2.0, 2.0, 200, 200};
  const ReturnDistributionView view{Representation::Cdf, &model, domain};
  const Conditioning cond = condition(model, std::vector<double>{0.2, 0.9, 0.1});
  std::vector<double> zs(101);
  for (int i = 0; i <= 100; ++i) zs[i] = -2.0 + 4.0 * i / 100.0;
  const auto ys = operator_target_batch(view, cond, 0.3, 0.5, zs);
  for (std::size_t i = 1; i < ys.size(); ++i) CHECK(ys[i] >= ys[i - 1]);
}

TEST_CASE("pdf operator conserves mass") {
  UmnnModel model = test::small_model(3, 8, 32, 7);
  const ReturnDomain domain{-2.0, 2.0, 200, 200};
  const ReturnDistributionView view{Representation::Pdf, &model, domain};
  const Conditioning cond = condition(model, std::vector<double>{0.4, 0.5, 0.6});
  // Change of variables: integrating y(z) = (1/gamma) p((z-r)/gamma) over a
  // window mapping back to the density's support gives ~1. Random networks
  // can be heavy-tailed, so the window expands until the cdf covers it.
  const double r = 0.3, gamma = 0.5;
  double L = 4.0;
  while (cdf_eval(model, cond, -L) > 1e-4 || cdf_eval(model, cond, L) < 1.0 - 1e-4) {
    L *= 2.0;
    REQUIRE(L < 1e7);
  }
  const double lo = r + gamma * -L, hi = r + gamma * L;
  const int n = 4001;
  const double h = (hi - lo) / (n - 1);
  std::vector<double> zs(n);
  for (int i = 0; i < n; ++i) zs[i] = lo + h * i;
  const auto ys = operator_target_batch(view, cond, r, gamma, zs);
  double integral = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    integral += w * ys[i];
  }
  integral *= h / 3.0;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("terminal targets") {
  const ReturnDomain domain{-2.0, 2.0, 200, 200};

  // QF of a Dirac is the constant reward.
  for (double tau : {0.0, 0.3, 1.0}) {
    CHECK(terminal_target(Representation::Qf, 0.97, tau, domain) == 0.97);
  }

  // PDF: gaussian with sigma = width / n_z = 0.02 centred at r.
  CHECK(terminal_pdf_sigma(domain) == doctest::Approx(0.02));
  const double r = 0.5;
  const double peak = terminal_target(Representation::Pdf, r, r, domain);
  CHECK(peak == doctest::Approx(1.0 / (0.02 * std::sqrt(2.0 * M_PI))).epsilon(1e-12));
  const double off = terminal_target(Representation::Pdf, r, r + 0.02, domain);
  CHECK(off == doctest::Approx(peak * std::exp(-0.5)).epsilon(1e-12));

  // CDF: steep logistic step with slope 4 n_z / width.
  CHECK(terminal_cdf_slope(domain) == doctest::Approx(200.0));
  CHECK(terminal_target(Representation::Cdf, r, r - 0.1, domain) <= 1e-3);
  CHECK(terminal_target(Representation::Cdf, r, r + 0.1, domain) >= 1.0 - 1e-3);
}

TEST_SUITE_END();
