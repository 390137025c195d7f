#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>

namespace umdqn {

/// Branch-free double-precision exp, accurate to a few ulp over the full
/// finite range. Unlike libm this inlines into array loops and lets the
/// compiler vectorise the activation kernels, which dominate training time.
inline double fast_exp(double x) {
  // Range reduction x = n*ln2 + r with the usual two-part ln2 split.
  constexpr double kLog2E = 1.4426950408889634073599;
  constexpr double kC1 = 6.93145751953125e-1;
  constexpr double kC2 = 1.42860682030941723212e-6;
  constexpr double kMax = 708.0;
  constexpr double kMin = -708.0;

  double xc = x < kMin ? kMin : (x > kMax ? kMax : x);
  double pxf = std::floor(kLog2E * xc + 0.5);
  auto n = static_cast<std::int64_t>(pxf);
  xc -= pxf * kC1;
  xc -= pxf * kC2;

  // exp(r) as a Pade rational in r^2 (Cephes coefficients).
  const double xx = xc * xc;
  double px = 1.26177193074810590878e-4;
  px = px * xx + 3.02994407707441961300e-2;
  px = px * xx + 9.99999999999999999910e-1;
  px *= xc;
  double qx = 3.00198505138664455042e-6;
  qx = qx * xx + 2.52448340349684104192e-3;
  qx = qx * xx + 2.27265548208155028766e-1;
  qx = qx * xx + 2.00000000000000000005e0;
  double e = px / (qx - px);
  e = 1.0 + 2.0 * e;

  // Scale by 2^n through the exponent bits.
  const std::uint64_t bits = static_cast<std::uint64_t>(n + 1023) << 52;
  return e * std::bit_cast<double>(bits);
}

/// Numerically stable logistic sigmoid.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Derivative of the logistic sigmoid, s(x) * (1 - s(x)).
inline double sigmoid_deriv(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

/// Standard normal density.
inline double normal_pdf(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014326779399;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace umdqn
