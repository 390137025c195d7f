#include "umdqn/bellman.hpp"

#include <cmath>

#include "umdqn/errors.hpp"
#include "umdqn/fastmath.hpp"

namespace umdqn {

int next_action(const ReturnDistributionView& target_view, std::span<const double> next_obs,
                int n_actions, const ExpectationParams& params, Rng& rng) {
  // One shared noise draw across actions: identical distributions compare
  // as exact ties (broken toward the lowest index) and the comparison
  // itself is free of Monte Carlo noise.
  std::vector<double> draws(params.n_mc);
  for (double& u : draws) u = rng.uniform();
  int best = 0;
  double best_value = 0.0;
  for (int a = 0; a < n_actions; ++a) {
    const std::vector<double> feats = make_features(next_obs, a, n_actions);
    const double value = expectation_with_draws(target_view, feats, params, draws);
    if (a == 0 || value > best_value) {
      best = a;
      best_value = value;
    }
  }
  return best;
}

double operator_target(const ReturnDistributionView& target_view, const Conditioning& next_cond,
                       double r, double gamma, double x) {
  const double xs[] = {x};
  return operator_target_batch(target_view, next_cond, r, gamma, xs)[0];
}

std::vector<double> operator_target_batch(const ReturnDistributionView& target_view,
                                          const Conditioning& next_cond, double r, double gamma,
                                          std::span<const double> xs) {
  const UmnnModel& model = *target_view.model;
  std::vector<double> out(xs.size());
  switch (target_view.rep) {
    case Representation::Qf: {
      const ViewEval ve = view_eval(Representation::Qf, model, next_cond, xs);
      for (std::size_t i = 0; i < xs.size(); ++i) out[i] = r + gamma * ve.values[i];
      break;
    }
    case Representation::Cdf:
    case Representation::Pdf: {
      if (gamma == 0.0) {
        throw DomainError("operator_target: gamma = 0 degenerates the PDF/CDF operator");
      }
      std::vector<double> ts(xs.size());
      for (std::size_t i = 0; i < xs.size(); ++i) ts[i] = (xs[i] - r) / gamma;
      const ViewEval ve = view_eval(target_view.rep, model, next_cond, ts);
      if (target_view.rep == Representation::Cdf) {
        out = ve.values;
      } else {
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = ve.values[i] / gamma;
      }
      break;
    }
  }
  return out;
}

double terminal_cdf_slope(const ReturnDomain& domain) {
  return 4.0 * domain.n_z / domain.width();
}

double terminal_pdf_sigma(const ReturnDomain& domain) { return domain.width() / domain.n_z; }

double terminal_target(Representation rep, double r, double x, const ReturnDomain& domain) {
  switch (rep) {
    case Representation::Pdf: {
      const double sigma = terminal_pdf_sigma(domain);
      const double u = (x - r) / sigma;
      return normal_pdf(u) / sigma;
    }
    case Representation::Cdf: {
      const double k = terminal_cdf_slope(domain);
      return sigmoid(k * (x - r));
    }
    case Representation::Qf:
      return r;
  }
  return r;
}

}  // namespace umdqn
