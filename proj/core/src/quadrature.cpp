#include "umdqn/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "umdqn/errors.hpp"
#include "umdqn/fastmath.hpp"

namespace umdqn {

ClenshawCurtisRule ClenshawCurtisRule::make(int count) {
  if (count < 2) throw DomainError("ClenshawCurtisRule: need at least 2 nodes");
  const int n = count - 1;  // panel count
  ClenshawCurtisRule rule;
  rule.count = count;
  rule.nodes.resize(count);
  rule.weights.resize(count);

  // Ascending Lobatto nodes cos(j*pi/n), j = n..0.
  for (int j = 0; j <= n; ++j) {
    rule.nodes[j] = -std::cos(static_cast<double>(j) * M_PI / n);
  }

  // Classic weights via the cosine series; O(n^2) but rules are tiny and
  // the result is cached by callers.
  for (int j = 0; j <= n; ++j) {
    double s = 1.0;
    for (int k = 1; k <= n / 2; ++k) {
      const double bk = (2 * k == n) ? 1.0 : 2.0;
      s -= bk / (4.0 * k * k - 1.0) * std::cos(2.0 * k * j * M_PI / n);
    }
    const double cj = (j == 0 || j == n) ? 1.0 : 2.0;
    rule.weights[n - j] = cj * s / n;
  }
  return rule;
}

double clenshaw_curtis(const BatchFn& f, double a, double b, const ClenshawCurtisRule& rule) {
  if (a > b) throw DomainError("clenshaw_curtis: a > b");
  if (a == b) return 0.0;
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  std::vector<double> ts(rule.count), vals(rule.count);
  for (int i = 0; i < rule.count; ++i) ts[i] = mid + half * rule.nodes[i];
  f(ts, vals);
  double acc = 0.0;
  for (int i = 0; i < rule.count; ++i) {
    if (!std::isfinite(vals[i])) {
      throw NumericError("clenshaw_curtis: non-finite integrand value at t = " +
                         std::to_string(ts[i]));
    }
    acc += rule.weights[i] * vals[i];
  }
  return half * acc;
}

const ChebyshevOps& ChebyshevOps::cached(int n) {
  static std::mutex mu;
  static std::map<int, ChebyshevOps> cache;
  std::scoped_lock lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  if (n < 2) throw DomainError("ChebyshevOps: need at least 2 nodes");
  ChebyshevOps ops;
  ops.n = n;
  const int m = n - 1;  // polynomial degree

  // DCT-I style transform: coefficients a_k of the interpolant through the
  // values at Lobatto nodes, with the end corrections folded in so that
  // f(x) = sum_k a_k T_k(x) as a plain sum. Row k, column j addresses the
  // value at ascending node j (= standard node index m - j).
  ops.vals_to_coeffs = Matrix(n, n);
  for (int k = 0; k < n; ++k) {
    const double ck = (k == 0 || k == m) ? 1.0 : 2.0;
    for (int j = 0; j <= m; ++j) {
      const double cj = (j == 0 || j == m) ? 0.5 : 1.0;
      const double val = cj * std::cos(k * j * M_PI / m) * ck / m;
      ops.vals_to_coeffs(k, m - j) = val;
    }
  }

  // Term-wise antiderivative on [-1, 1]:
  //   int T_0 = T_1,  int T_1 = T_2 / 4 (+ const),
  //   int T_k = T_{k+1} / (2(k+1)) - T_{k-1} / (2(k-1)) for k >= 2.
  // The constant term is left at zero; consumers difference two endpoints.
  ops.antiderivative = Matrix(n + 1, n);
  for (int k = 0; k < n; ++k) {
    if (k == 0) {
      ops.antiderivative(1, 0) += 1.0;
    } else if (k == 1) {
      ops.antiderivative(2, 1) += 0.25;
    } else {
      ops.antiderivative(k + 1, k) += 1.0 / (2.0 * (k + 1));
      ops.antiderivative(k - 1, k) -= 1.0 / (2.0 * (k - 1));
    }
  }
  return cache.emplace(n, std::move(ops)).first->second;
}

double cheb_eval(std::span<const double> coeffs, double xhat) {
  double b1 = 0.0, b2 = 0.0;
  const double x2 = 2.0 * xhat;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 1; --k) {
    const double b0 = coeffs[k] + x2 * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return coeffs[0] + xhat * b1 - b2;
}

void cheb_basis(double xhat, std::span<double> basis) {
  const std::size_t n = basis.size();
  if (n == 0) return;
  basis[0] = 1.0;
  if (n == 1) return;
  basis[1] = xhat;
  const double x2 = 2.0 * xhat;
  for (std::size_t k = 2; k < n; ++k) basis[k] = x2 * basis[k - 1] - basis[k - 2];
}

}  // namespace umdqn
