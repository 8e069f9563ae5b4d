#pragma once

// Real branches of the Lambert W function and a cancellation-free coth.
//
// W0 is solved by Halley iteration on w*exp(w) - x. W-1 is solved on the
// logarithmic form y - log1p(y) = s with y = -1 - w and x = -exp(-1 - s),
// which keeps full relative accuracy both next to the branch point (small s)
// and for arguments so close to zero that exp(-1 - s) underflows.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qsd::specfun {

// -1/e, the common endpoint of W0 and W-1.
inline constexpr double kBranchPoint = -0.36787944117144232159552377016146;

// Inputs this far below the branch point are treated as the branch point.
inline constexpr double kBranchTolerance = 1e-15;

namespace detail {

inline constexpr double kEulerHi = 2.718281828459045;
inline constexpr double kEulerLo = 1.4456468917292502e-16;

// Below this offset from the branch point the series is used instead of Halley.
inline constexpr double kSeriesOffset = 2.718281828459045e-6;  // e * 1e-6

inline constexpr int kMaxIterations = 40;
inline constexpr double kStepTolerance = 1e-14;

// 1 + e*x with e split into two doubles so the offset keeps its relative
// accuracy as x approaches -1/e.
inline double branch_offset(double x) {
  return std::fma(kEulerHi, x, 1.0) + kEulerLo * x;
}

// y = -1 - W(x) around the branch point as a series in p = +-sqrt(2(1 + e x)),
// with p > 0 selecting W-1 and p < 0 selecting W0.
inline double branch_series(double p) {
  constexpr double c2 = 1.0 / 3.0;
  constexpr double c3 = 11.0 / 72.0;
  constexpr double c4 = 43.0 / 540.0;
  constexpr double c5 = 769.0 / 17280.0;
  constexpr double c6 = 221.0 / 8505.0;
  return p * (1.0 + p * (c2 + p * (c3 + p * (c4 + p * (c5 + p * c6)))));
}

[[noreturn]] inline void domain_failure(const char* fn, double x) {
  throw std::domain_error(std::string(fn) + ": argument " + std::to_string(x) +
                          " outside the branch domain");
}

// Solves y - log1p(y) = s for y >= 0, given eta = 1 - exp(-s).
inline double solve_lower_branch(double s, double eta) {
  if (eta < kSeriesOffset) return branch_series(std::sqrt(2.0 * eta));

  double y = s < 2.0 ? branch_series(std::sqrt(2.0 * eta)) : s + std::log1p(s);
  for (int i = 0; i < kMaxIterations; ++i) {
    const double g = y - std::log1p(y) - s;
    const double slope = y / (1.0 + y);
    const double newton = g / slope;
    const double dy = newton / (1.0 - g / (2.0 * y * y));
    y -= dy;
    if (!(y > 0.0)) y = 0.5 * (y + dy);  // overshoot past the branch point
    if (std::abs(dy) <= kStepTolerance * (2.0 + y)) break;
  }
  return y;
}

}  // namespace detail

/// Principal branch W0 on [-1/e, inf). Returns w >= -1 with w*exp(w) = x.
/// Throws std::domain_error below the branch point.
inline double lambert_w0(double x) {
  if (std::isnan(x)) detail::domain_failure("lambert_w0", x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) {
    if (x > 0) return x;
    detail::domain_failure("lambert_w0", x);
  }
  const double eta = detail::branch_offset(x);
  if (eta <= 0.0) {
    if (x >= kBranchPoint - kBranchTolerance) return -1.0;
    detail::domain_failure("lambert_w0", x);
  }
  if (eta < detail::kSeriesOffset) {
    return -1.0 - detail::branch_series(-std::sqrt(2.0 * eta));
  }
  if (std::abs(x) < 1e-5) return x * (1.0 - x * (1.0 - 1.5 * x));

  double w;
  if (eta < 0.5) {
    w = -1.0 - detail::branch_series(-std::sqrt(2.0 * eta));
  } else {
    // Winitzki's global approximation.
    const double l = std::log1p(x);
    w = l * (1.0 - std::log1p(l) / (2.0 + l));
  }
  for (int i = 0; i < detail::kMaxIterations; ++i) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    const double dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
    w -= dw;
    if (std::abs(dw) <= detail::kStepTolerance * (1.0 + std::abs(w))) break;
  }
  return w;
}

/// Lower branch W-1 on [-1/e, 0). Returns w <= -1 with w*exp(w) = x.
/// Throws std::domain_error for x >= 0 or below the branch point.
inline double lambert_wm1(double x) {
  if (!(x < 0.0)) detail::domain_failure("lambert_wm1", x);
  const double eta = detail::branch_offset(x);
  if (eta <= 0.0) {
    if (x >= kBranchPoint - kBranchTolerance) return -1.0;
    detail::domain_failure("lambert_wm1", x);
  }
  // s = -1 - ln(-x); near the branch point take it from the accurate offset.
  const double s = eta < 0.5 ? -std::log1p(-eta) : -1.0 - std::log(-x);
  return -1.0 - detail::solve_lower_branch(s, eta);
}

/// W-1(-exp(-1 - s)) for s >= 0, without forming the argument. The argument
/// underflows for s beyond ~744 and loses its offset from -1/e for small s;
/// this form has neither problem.
inline double lambert_wm1_neg_exp(double s) {
  if (!(s >= 0.0) || std::isinf(s)) {
    throw std::domain_error("lambert_wm1_neg_exp: offset must be finite and >= 0");
  }
  if (s == 0.0) return -1.0;
  return -1.0 - detail::solve_lower_branch(s, -std::expm1(-s));
}

/// coth(u) for u > 0. Uses the Laurent series below u = 1e-2 where
/// 1/tanh(u) starts to lose digits, and saturates to 1 for large u.
inline double coth_stable(double u) {
  if (!(u > 0.0)) throw std::domain_error("coth_stable: argument must be > 0");
  if (u < 1e-2) {
    const double u2 = u * u;
    return 1.0 / u + u * (1.0 / 3.0 + u2 * (-1.0 / 45.0 + u2 * (2.0 / 945.0)));
  }
  return 1.0 / std::tanh(u);
}

}  // namespace qsd::specfun
