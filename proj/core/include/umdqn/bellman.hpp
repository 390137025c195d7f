#pragma once

#include <span>
#include <vector>

#include "umdqn/distrib.hpp"
#include "umdqn/rng.hpp"

namespace umdqn {

/// Greedy action under the target view: argmax over actions of the
/// expectation of the return distribution at the next state, ties broken by
/// the lowest action index.
int next_action(const ReturnDistributionView& target_view, std::span<const double> next_obs,
                int n_actions, const ExpectationParams& params, Rng& rng);

/// Distributional Bellman operator target for one non-terminal experience,
/// evaluated at x under the target parameters:
///   PDF: (1/gamma) p((x - r)/gamma | s', a')
///   CDF: F((x - r)/gamma | s', a')
///   QF:  r + gamma F^-1(x | s', a')
/// Transformed points are passed to the network unclamped. Throws
/// DomainError for gamma == 0 with the PDF/CDF representations.
double operator_target(const ReturnDistributionView& target_view, const Conditioning& next_cond,
                       double r, double gamma, double x);

/// Batched operator targets over a shared grid (one interpolant record for
/// the whole grid).
std::vector<double> operator_target_batch(const ReturnDistributionView& target_view,
                                          const Conditioning& next_cond, double r, double gamma,
                                          std::span<const double> xs);

/// Bellman target for a terminal experience: the Dirac return at r is
/// smoothed into a narrow Gaussian (PDF) or a steep logistic step (CDF);
/// the QF of a Dirac is the constant r.
double terminal_target(Representation rep, double r, double x, const ReturnDomain& domain);

/// Slope of the smoothed terminal CDF step.
double terminal_cdf_slope(const ReturnDomain& domain);
/// Width of the smoothed terminal PDF peak.
double terminal_pdf_sigma(const ReturnDomain& domain);

}  // namespace umdqn
