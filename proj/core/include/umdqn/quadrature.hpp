#pragma once

#include <functional>
#include <span>
#include <vector>

#include "umdqn/autodiff.hpp"

namespace umdqn {

/// Batched integrand: fills out[i] = f(ts[i]). All node evaluations of one
/// quadrature are issued through a single call.
using BatchFn = std::function<void(std::span<const double>, std::span<double>)>;

/// Clenshaw-Curtis rule on [-1, 1]: Chebyshev-Lobatto nodes (endpoints
/// included, ascending) with positive weights summing to 2. Exact for
/// polynomials of degree < count.
struct ClenshawCurtisRule {
  int count = 0;
  std::vector<double> nodes;
  std::vector<double> weights;

  static ClenshawCurtisRule make(int count);
};

/// Integrates f over [a, b] with the given rule. Throws NumericError if an
/// integrand value is not finite and DomainError if a > b.
double clenshaw_curtis(const BatchFn& f, double a, double b, const ClenshawCurtisRule& rule);

/// Dense Chebyshev machinery for the rule's node count, cached per size.
/// Clenshaw-Curtis quadrature is exactly "integrate the polynomial that
/// interpolates f at Chebyshev-Lobatto nodes", so the same transforms serve
/// both the scalar quadrature and the shared-interpolant batch evaluation
/// of many integrals of one integrand.
struct ChebyshevOps {
  int n = 0;              // node count
  Matrix vals_to_coeffs;  // n x n: values at ascending Lobatto nodes -> series coefficients
  Matrix antiderivative;  // (n+1) x n: series coefficients -> antiderivative coefficients on [-1,1]

  static const ChebyshevOps& cached(int n);
};

/// Evaluates a Chebyshev series at xhat in [-1, 1] (Clenshaw recurrence).
double cheb_eval(std::span<const double> coeffs, double xhat);

/// Fills basis[k] = T_k(xhat) for k = 0..basis.size()-1.
void cheb_basis(double xhat, std::span<double> basis);

}  // namespace umdqn
