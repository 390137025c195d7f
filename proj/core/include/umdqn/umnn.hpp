#pragma once

#include <span>
#include <vector>

#include "umdqn/autodiff.hpp"
#include "umdqn/quadrature.hpp"
#include "umdqn/rng.hpp"

namespace umdqn {

/// Latent choice for the CDF/PDF heads: logistic sigma keeps the density
/// the exact derivative of the CDF; the normal latent is exposed as an
/// alternative without changing anything else.
enum class Latent { Logistic, Normal };

/// Conditioned monotonic map G(x | c; theta) = int_0^x g(t, c; theta_g) dt
/// + beta(c; theta_beta). The integrand network is strictly positive, so G
/// is strictly increasing in x for every conditioning vector.
struct UmnnModel {
  Mlp embedding;  // raw (state, action) features -> conditioning vector c
  Mlp integrand;  // [t, c] -> positive scalar
  Mlp offset;     // c -> beta
  int n_cc = 32;
  Latent latent = Latent::Logistic;

  int feature_width() const { return embedding.input_width(); }
  int embed_width() const { return embedding.output_width(); }
  int hidden_width() const { return integrand.layers.front().weight.value.rows; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  /// Deep copy; used for target network snapshots.
  UmnnModel clone() const;
  /// Copies parameter values (not gradients) from another model of
  /// identical shape.
  void assign_values(const UmnnModel& other);
};

UmnnModel make_umnn_model(int feature_width, int embed_width, int hidden_width, int n_cc,
                          Rng& rng);

/// Embedding pass for one (state, action) feature vector, plus the folds
/// the integrand kernels reuse across node evaluations: the conditioning
/// part of the first integrand layer (hc) and its t column (wt).
struct Conditioning {
  std::vector<double> features;
  ForwardRecord embed_record;
  std::vector<double> c;
  std::vector<double> hc;
  std::vector<double> wt;
  ForwardRecord offset_record;
  double beta = 0.0;
};

Conditioning condition(const UmnnModel& model, std::span<const double> features);

/// One shared-interpolant evaluation of G (and optionally g) at many
/// points. The integrand is sampled once at the Clenshaw-Curtis nodes of
/// hull({0} u xs); integrating the interpolant reproduces per-point
/// Clenshaw-Curtis quadrature over [0, x] (identically so for a single
/// point) while sharing the network evaluations across all points.
struct UmnnEval {
  std::vector<double> G;   // G(x | c) at each requested point
  std::vector<double> gx;  // integrand at each point (when requested)

  // Retained for backward.
  std::vector<double> xs;
  std::vector<double> ts;  // node positions
  double lo = 0.0, hi = 0.0;
  bool want_g = false;
  bool degenerate = false;  // all points at zero: empty integral
};

UmnnEval umnn_eval(const UmnnModel& model, const Conditioning& cond, std::span<const double> xs,
                   bool want_g);

/// Reverse pass of umnn_eval (Leibniz rule: the parameter derivative of the
/// integral is the integral of the per-node integrand derivatives).
/// Accumulates into the model's parameter gradients. dgx may be empty when
/// the forward pass did not request integrand values.
void umnn_eval_backward(UmnnModel& model, const Conditioning& cond, const UmnnEval& eval,
                        std::span<const double> dG, std::span<const double> dgx);

/// G(x | c) for a single point.
double umnn_forward(const UmnnModel& model, const Conditioning& cond, double x);

/// Forward pass with enough state retained to run umnn_backward.
struct UmnnRecord {
  Conditioning cond;
  UmnnEval eval;
  double x = 0.0;
  double value = 0.0;
};

UmnnRecord umnn_forward_record(const UmnnModel& model, std::span<const double> features,
                               double x);
void umnn_backward(UmnnModel& model, const UmnnRecord& record, double upstream);
/// dG/dx at the recorded point; equals g(x, c).
double umnn_grad_x(const UmnnRecord& record);

/// F_Z(z | c) = sigma(G(z | c)); strictly increasing, in (0, 1).
double cdf_eval(const UmnnModel& model, const Conditioning& cond, double z);

/// p_Z(z | c) = g(z, c) * sigma'(G(z | c)); the exact derivative of
/// cdf_eval under the logistic latent.
double pdf_eval(const UmnnModel& model, const Conditioning& cond, double z);

/// F^-1_Z(tau | c) = G(tau | c) for tau in [0, 1].
double qf_eval(const UmnnModel& model, const Conditioning& cond, double tau);

/// Solves G(x | c) = y by doubling bracket expansion plus bisection.
/// Throws DomainError when no bracket is found within |x| <= 1e6 and
/// NumericError if bisection cannot reach the tolerance.
double umnn_invert(const UmnnModel& model, const Conditioning& cond, double y, double tol);

/// Latent heads shared by the view layer.
double latent_cdf(Latent latent, double u);
double latent_pdf(Latent latent, double u);

/// Batched integrand evaluation g(t, c) at arbitrary points (no record).
std::vector<double> integrand_values(const UmnnModel& model, const Conditioning& cond,
                                     std::span<const double> ts);

}  // namespace umdqn
