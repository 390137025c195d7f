#pragma once

#include <span>
#include <vector>

#include "umdqn/rng.hpp"
#include "umdqn/umnn.hpp"

namespace umdqn {

enum class Representation { Pdf, Cdf, Qf };

const char* representation_name(Representation rep);

/// Evaluation domain for the return distribution: [z_min, z_max] with n_z
/// sample points for PDF/CDF grids and n_tau quantile fractions for QF
/// grids.
struct ReturnDomain {
  double z_min = -2.0;
  double z_max = 2.0;
  int n_z = 200;
  int n_tau = 200;

  void validate() const;
  double width() const { return z_max - z_min; }
};

/// A representation tag plus the model and domain needed to interpret the
/// monotonic network output as a PDF, CDF or QF.
struct ReturnDistributionView {
  Representation rep = Representation::Cdf;
  const UmnnModel* model = nullptr;
  ReturnDomain domain;
};

/// Network input for a state-action pair: observation followed by a
/// one-hot action encoding.
std::vector<double> make_features(std::span<const double> obs, int action, int n_actions);

/// Evaluation points for one training step, shared across the batch.
/// PDF/CDF: one set of n_z returns uniform on [z_min, z_max], used for both
/// the main and the target side. QF: two independent sets of n_tau
/// fractions uniform on [0, 1].
struct SampleGrid {
  std::vector<double> main_points;
  std::vector<double> target_points;
};

SampleGrid sample_grid(const ReturnDomain& domain, Representation rep, Rng& rng);

inline constexpr double kKlFloor = 1e-12;

/// Sum over the flattened grid/batch of y * log(y / max(p, floor)).
/// Only the model values receive gradients; y = 0 terms contribute zero.
/// Throws DomainError on negative targets.
double kl_loss(std::span<const double> target, std::span<const double> model_vals,
               std::span<double> dmodel = {});

/// Per-experience root of summed squared differences, summed over the
/// batch; grid_size values per experience.
double cramer_loss(std::span<const double> target, std::span<const double> model_vals,
                   int grid_size, std::span<double> dmodel = {});

/// Asymmetric smoothed quantile regression loss
/// rho_tau^kappa(x) = |tau - 1{x<0}| * H_kappa(x) / kappa.
double quantile_huber(double x, double tau, double kappa);
double quantile_huber_deriv(double x, double tau, double kappa);

/// Sum over experiences and main fractions i of the mean over target
/// fractions j of quantile_huber(delta_ij, tau_i, kappa). delta is laid out
/// per experience as an i-major tau_i.size() x n_j block.
double wasserstein_loss(std::span<const double> delta, std::span<const double> tau_main,
                        int n_j, double kappa, std::span<double> ddelta = {});

struct ExpectationParams {
  int simpson_points = 201;
  int n_mc = 256;
};

/// Expectation of the random return under the view.
///
/// QF: mean of the quantile function at n_mc uniform fractions. PDF/CDF:
/// the integrand is evaluated once on an even grid over [z_min, z_max], the
/// inner integrals are combined with a composite Simpson rule, and the
/// outer integral of z * p(z) is estimated by Monte Carlo reusing those
/// cached evaluations (stratified inverse-CDF sampling on the cached grid).
double expectation(const ReturnDistributionView& view, std::span<const double> features,
                   const ExpectationParams& params, Rng& rng);

/// As above with the Monte Carlo noise supplied by the caller (n_mc
/// uniforms). Reusing one draw across an argmax makes equal-value actions
/// compare as exact ties and removes the comparison noise.
double expectation_with_draws(const ReturnDistributionView& view,
                              std::span<const double> features, const ExpectationParams& params,
                              std::span<const double> draws);

/// Representation values (PDF density / CDF probability / QF value) at the
/// given points, keeping the underlying evaluation for the reverse pass.
struct ViewEval {
  UmnnEval eval;
  std::vector<double> values;
};

ViewEval view_eval(Representation rep, const UmnnModel& model, const Conditioning& cond,
                   std::span<const double> xs);

void view_eval_backward(Representation rep, UmnnModel& model, const Conditioning& cond,
                        const ViewEval& ve, std::span<const double> dvalues);

/// 500-point (x, value) curve of the view over its natural domain.
std::vector<std::pair<double, double>> dump_curve(const ReturnDistributionView& view,
                                                  std::span<const double> features,
                                                  int points = 500);

}  // namespace umdqn
