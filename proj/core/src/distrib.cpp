#include "umdqn/distrib.hpp"

#include <algorithm>
#include <cmath>

#include "umdqn/errors.hpp"
#include "umdqn/fastmath.hpp"

namespace umdqn {

const char* representation_name(Representation rep) {
  switch (rep) {
    case Representation::Pdf:
      return "pdf";
    case Representation::Cdf:
      return "cdf";
    case Representation::Qf:
      return "qf";
  }
  return "?";
}

void ReturnDomain::validate() const {
  if (!(z_min < z_max)) throw ValidationError("ReturnDomain: z_min must be < z_max");
  if (!std::isfinite(z_min) || !std::isfinite(z_max)) {
    throw ValidationError("ReturnDomain: bounds must be finite");
  }
  if (n_z < 2) throw ValidationError("ReturnDomain: n_z must be >= 2");
  if (n_tau < 2) throw ValidationError("ReturnDomain: n_tau must be >= 2");
}

std::vector<double> make_features(std::span<const double> obs, int action, int n_actions) {
  if (action < 0 || action >= n_actions) {
    throw DomainError("make_features: action " + std::to_string(action) + " out of range");
  }
  std::vector<double> f(obs.size() + static_cast<std::size_t>(n_actions), 0.0);
  std::copy(obs.begin(), obs.end(), f.begin());
  f[obs.size() + static_cast<std::size_t>(action)] = 1.0;
  return f;
}

SampleGrid sample_grid(const ReturnDomain& domain, Representation rep, Rng& rng) {
  SampleGrid grid;
  if (rep == Representation::Qf) {
    grid.main_points.resize(domain.n_tau);
    grid.target_points.resize(domain.n_tau);
    for (double& x : grid.main_points) x = rng.uniform();
    for (double& x : grid.target_points) x = rng.uniform();
  } else {
    grid.main_points.resize(domain.n_z);
    for (double& x : grid.main_points) x = rng.uniform(domain.z_min, domain.z_max);
    grid.target_points = grid.main_points;
  }
  return grid;
}

double kl_loss(std::span<const double> target, std::span<const double> model_vals,
               std::span<double> dmodel) {
  if (target.size() != model_vals.size()) throw DimensionError("kl_loss: length mismatch");
  if (!dmodel.empty() && dmodel.size() != model_vals.size()) {
    throw DimensionError("kl_loss: gradient length mismatch");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double y = target[i];
    if (y < 0.0) throw DomainError("kl_loss: negative target value");
    if (y == 0.0) {
      if (!dmodel.empty()) dmodel[i] = 0.0;
      continue;
    }
    const double p = std::max(model_vals[i], kKlFloor);
    loss += y * (std::log(y) - std::log(p));
    if (!dmodel.empty()) dmodel[i] = model_vals[i] > kKlFloor ? -y / model_vals[i] : 0.0;
  }
  return loss;
}

double cramer_loss(std::span<const double> target, std::span<const double> model_vals,
                   int grid_size, std::span<double> dmodel) {
  if (target.size() != model_vals.size()) throw DimensionError("cramer_loss: length mismatch");
  if (grid_size < 1 || target.size() % static_cast<std::size_t>(grid_size) != 0) {
    throw DimensionError("cramer_loss: batch is not a multiple of the grid size");
  }
  if (!dmodel.empty() && dmodel.size() != model_vals.size()) {
    throw DimensionError("cramer_loss: gradient length mismatch");
  }
  const std::size_t n_exp = target.size() / static_cast<std::size_t>(grid_size);
  double loss = 0.0;
  for (std::size_t e = 0; e < n_exp; ++e) {
    const std::size_t base = e * static_cast<std::size_t>(grid_size);
    double sq = 0.0;
    for (int k = 0; k < grid_size; ++k) {
      const double d = model_vals[base + k] - target[base + k];
      sq += d * d;
    }
    const double root = std::sqrt(sq);
    loss += root;
    if (!dmodel.empty()) {
      for (int k = 0; k < grid_size; ++k) {
        const double d = model_vals[base + k] - target[base + k];
        dmodel[base + k] = root > 0.0 ? d / root : 0.0;
      }
    }
  }
  return loss;
}

double quantile_huber(double x, double tau, double kappa) {
  if (tau < 0.0 || tau > 1.0) throw DomainError("quantile_huber: tau outside [0, 1]");
  if (kappa <= 0.0) throw DomainError("quantile_huber: kappa must be > 0");
  const double ax = std::abs(x);
  const double huber = ax <= kappa ? 0.5 * x * x : kappa * (ax - 0.5 * kappa);
  const double w = std::abs(tau - (x < 0.0 ? 1.0 : 0.0));
  return w * huber / kappa;
}

double quantile_huber_deriv(double x, double tau, double kappa) {
  const double hprime = std::abs(x) <= kappa ? x : (x > 0.0 ? kappa : -kappa);
  const double w = std::abs(tau - (x < 0.0 ? 1.0 : 0.0));
  return w * hprime / kappa;
}

double wasserstein_loss(std::span<const double> delta, std::span<const double> tau_main,
                        int n_j, double kappa, std::span<double> ddelta) {
  const std::size_t n_i = tau_main.size();
  if (n_i == 0 || n_j < 1) throw DimensionError("wasserstein_loss: empty fraction sets");
  const std::size_t block = n_i * static_cast<std::size_t>(n_j);
  if (delta.size() % block != 0) {
    throw DimensionError("wasserstein_loss: delta is not a multiple of the pair block");
  }
  if (!ddelta.empty() && ddelta.size() != delta.size()) {
    throw DimensionError("wasserstein_loss: gradient length mismatch");
  }
  const std::size_t n_exp = delta.size() / block;
  const double inv_j = 1.0 / n_j;
  double loss = 0.0;
  for (std::size_t e = 0; e < n_exp; ++e) {
    for (std::size_t i = 0; i < n_i; ++i) {
      const double tau = tau_main[i];
      const std::size_t base = e * block + i * static_cast<std::size_t>(n_j);
      double acc = 0.0;
      for (int j = 0; j < n_j; ++j) {
        const double x = delta[base + j];
        const double ax = std::abs(x);
        const double huber = ax <= kappa ? 0.5 * x * x : kappa * (ax - 0.5 * kappa);
        const double w = std::abs(tau - (x < 0.0 ? 1.0 : 0.0));
        acc += w * huber;
        if (!ddelta.empty()) {
          const double hprime = ax <= kappa ? x : (x > 0.0 ? kappa : -kappa);
          ddelta[base + j] = w * hprime / kappa * inv_j;
        }
      }
      loss += acc / kappa * inv_j;
    }
  }
  return loss;
}

namespace {

/// Prefix integrals of evenly spaced samples by the composite Simpson rule
/// (quadratic through each sample triple; the half-panel prefix uses the
/// same quadratic).
std::vector<double> cumulative_simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i + 2 < n; i += 2) {
    out[i + 1] = out[i] + h * (5.0 * f[i] + 8.0 * f[i + 1] - f[i + 2]) / 12.0;
    out[i + 2] = out[i] + h * (f[i] + 4.0 * f[i + 1] + f[i + 2]) / 3.0;
  }
  return out;
}

double latent_pdf_deriv(Latent latent, double u) {
  if (latent == Latent::Logistic) {
    const double s = sigmoid(u);
    return s * (1.0 - s) * (1.0 - 2.0 * s);
  }
  return -u * normal_pdf(u);
}

}  // namespace

double expectation(const ReturnDistributionView& view, std::span<const double> features,
                   const ExpectationParams& params, Rng& rng) {
  if (params.n_mc < 1) throw DomainError("expectation: n_mc must be >= 1");
  std::vector<double> draws(params.n_mc);
  for (double& u : draws) u = rng.uniform();
  return expectation_with_draws(view, features, params, draws);
}

double expectation_with_draws(const ReturnDistributionView& view,
                              std::span<const double> features, const ExpectationParams& params,
                              std::span<const double> draws) {
  if (params.n_mc < 1) throw DomainError("expectation: n_mc must be >= 1");
  if (draws.size() != static_cast<std::size_t>(params.n_mc)) {
    throw DimensionError("expectation: draw count does not match n_mc");
  }
  const UmnnModel& model = *view.model;
  Conditioning cond = condition(model, features);

  if (view.rep == Representation::Qf) {
    const UmnnEval ev = umnn_eval(model, cond, draws, false);
    double acc = 0.0;
    for (double v : ev.G) acc += v;
    return acc / params.n_mc;
  }

  const int s_pts = params.simpson_points;
  if (s_pts < 3 || s_pts % 2 == 0) {
    throw DomainError("expectation: simpson_points must be odd and >= 3");
  }
  const double h = view.domain.width() / (s_pts - 1);
  std::vector<double> zs(s_pts);
  for (int k = 0; k < s_pts; ++k) zs[k] = view.domain.z_min + h * k;

  // One batched integrand pass serves every inner integral.
  const std::vector<double> g = integrand_values(model, cond, zs);

  // Integral from 0 to z_min, needed because the cumulative grid starts at
  // z_min rather than the anchor of the monotonic map.
  const auto& rule = ClenshawCurtisRule::make(model.n_cc);
  const BatchFn batch_g = [&](std::span<const double> ts, std::span<double> out) {
    const std::vector<double> vals = integrand_values(model, cond, ts);
    std::copy(vals.begin(), vals.end(), out.begin());
  };
  double phi0 = 0.0;
  if (view.domain.z_min >= 0.0) {
    phi0 = clenshaw_curtis(batch_g, 0.0, view.domain.z_min, rule);
  } else {
    phi0 = -clenshaw_curtis(batch_g, view.domain.z_min, 0.0, rule);
  }

  const std::vector<double> inner = cumulative_simpson(g, h);
  std::vector<double> F(s_pts);
  for (int k = 0; k < s_pts; ++k) {
    F[k] = latent_cdf(model.latent, cond.beta + phi0 + inner[k]);
  }

  // Outer integral of z p(z) over the domain by Monte Carlo on the cached
  // evaluations: stratified inverse-CDF sampling between the cached CDF
  // values, scaled by the probability mass inside the window.
  const double mass = F[s_pts - 1] - F[0];
  if (mass <= 0.0) return 0.0;
  double acc = 0.0;
  int cell = 0;
  for (int s = 0; s < params.n_mc; ++s) {
    const double u = F[0] + mass * ((s + draws[s]) / params.n_mc);
    while (cell + 2 < s_pts && F[cell + 1] < u) ++cell;
    const double span = F[cell + 1] - F[cell];
    const double frac = span > 0.0 ? std::clamp((u - F[cell]) / span, 0.0, 1.0) : 0.5;
    acc += zs[cell] + frac * h;
  }
  return mass * acc / params.n_mc;
}

ViewEval view_eval(Representation rep, const UmnnModel& model, const Conditioning& cond,
                   std::span<const double> xs) {
  if (rep == Representation::Qf) {
    for (double t : xs) {
      if (t < 0.0 || t > 1.0) throw DomainError("view_eval: quantile fraction outside [0, 1]");
    }
  }
  ViewEval ve;
  ve.eval = umnn_eval(model, cond, xs, rep == Representation::Pdf);
  ve.values.resize(xs.size());
  switch (rep) {
    case Representation::Qf:
      ve.values = ve.eval.G;
      break;
    case Representation::Cdf:
      for (std::size_t i = 0; i < xs.size(); ++i) {
        ve.values[i] = latent_cdf(model.latent, ve.eval.G[i]);
      }
      break;
    case Representation::Pdf:
      for (std::size_t i = 0; i < xs.size(); ++i) {
        ve.values[i] = ve.eval.gx[i] * latent_pdf(model.latent, ve.eval.G[i]);
      }
      break;
  }
  return ve;
}

void view_eval_backward(Representation rep, UmnnModel& model, const Conditioning& cond,
                        const ViewEval& ve, std::span<const double> dvalues) {
  if (dvalues.size() != ve.values.size()) {
    throw DimensionError("view_eval_backward: upstream length mismatch");
  }
  const std::size_t n = dvalues.size();
  std::vector<double> dG(n, 0.0), dg;
  switch (rep) {
    case Representation::Qf:
      std::copy(dvalues.begin(), dvalues.end(), dG.begin());
      break;
    case Representation::Cdf:
      for (std::size_t i = 0; i < n; ++i) {
        dG[i] = dvalues[i] * latent_pdf(model.latent, ve.eval.G[i]);
      }
      break;
    case Representation::Pdf:
      dg.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double u = ve.eval.G[i];
        dg[i] = dvalues[i] * latent_pdf(model.latent, u);
        dG[i] = dvalues[i] * ve.eval.gx[i] * latent_pdf_deriv(model.latent, u);
      }
      break;
  }
  umnn_eval_backward(model, cond, ve.eval, dG, dg);
}

std::vector<std::pair<double, double>> dump_curve(const ReturnDistributionView& view,
                                                  std::span<const double> features, int points) {
  if (points < 2) throw DomainError("dump_curve: need at least 2 points");
  const bool qf = view.rep == Representation::Qf;
  const double lo = qf ? 0.0 : view.domain.z_min;
  const double hi = qf ? 1.0 : view.domain.z_max;
  std::vector<double> xs(points);
  for (int i = 0; i < points; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  }
  Conditioning cond = condition(*view.model, features);
  const ViewEval ve = view_eval(view.rep, *view.model, cond, xs);
  std::vector<std::pair<double, double>> curve(points);
  for (int i = 0; i < points; ++i) curve[i] = {xs[i], ve.values[i]};
  return curve;
}

}  // namespace umdqn
