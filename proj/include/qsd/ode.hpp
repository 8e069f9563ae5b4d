#pragma once

// Adaptive Dormand-Prince 5(4) integrator for small dense ODE systems.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qsd/errors.hpp"

namespace qsd::ode {

struct Tolerances {
  double rtol = 1e-9;
  double atol = 1e-12;
  std::size_t max_steps = 2'000'000;
  // Reject any stage that would make a component <= 0 and fail if an
  // accepted step does. Dispersions must stay positive.
  bool require_positive = true;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

namespace detail {

struct Tableau {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // b - b* (fifth minus embedded fourth order weights)
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

inline bool all_positive(std::span<const double> y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return v > 0.0; });
}

}  // namespace detail

/// Integrates dy/dt = rhs(t, y) from (t0, y0) and returns the state at every
/// entry of `t_out`, which must be non-decreasing and >= t0. The step size is
/// clipped so each output time is hit exactly.
///
/// `rhs` is called as rhs(t, std::span<const double> y, std::span<double> dydt).
template <class Rhs>
std::vector<std::vector<double>> integrate(Rhs&& rhs, double t0, std::vector<double> y0,
                                           std::span<const double> t_out,
                                           const Tolerances& tol = {}, Stats* stats = nullptr) {
  using T = detail::Tableau;
  const std::size_t n = y0.size();
  for (std::size_t k = 0; k < t_out.size(); ++k) {
    if (t_out[k] < t0 || (k > 0 && t_out[k] < t_out[k - 1]))
      throw InputError("output times must be non-decreasing and not before the start time");
  }
  if (tol.require_positive && !detail::all_positive(y0))
    throw SolverError("initial dispersion must be positive");

  std::vector<double> y = std::move(y0);
  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), stage(n), y_new(n);
  std::vector<std::vector<double>> out;
  out.reserve(t_out.size());

  auto eval = [&](double t, const std::vector<double>& state, std::vector<double>& dst) {
    rhs(t, std::span<const double>(state), std::span<double>(dst));
  };

  double t = t0;
  eval(t, y, k1);

  auto scale = [&](double a, double b) {
    return tol.atol + tol.rtol * std::max(std::abs(a), std::abs(b));
  };

  // Initial step from the size of y and its derivative (Hairer, Norsett, Wanner).
  double h = 0.0;
  if (!t_out.empty() && t_out.back() > t0) {
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = scale(y[i], y[i]);
      d0 = std::max(d0, std::abs(y[i]) / sc);
      d1 = std::max(d1, std::abs(k1[i]) / sc);
    }
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, t_out.back() - t0);
  }

  std::size_t steps = 0;
  Stats local;
  for (double target : t_out) {
    while (t < target) {
      if (++steps > tol.max_steps) throw SolverError("ODE integration exceeded the step budget");
      const bool last = h >= target - t;
      const double step = last ? target - t : h;
      // The step no longer moves t at working precision.
      if (!last && !(t + step > t + 4.0 * std::numeric_limits<double>::epsilon() * std::abs(t)))
        throw SolverError("ODE step size underflow at t = " + std::to_string(t));

      bool stage_ok = true;
      auto make_stage = [&](auto&& combine) {
        for (std::size_t i = 0; i < n; ++i) stage[i] = y[i] + step * combine(i);
        if (tol.require_positive && !detail::all_positive(stage)) stage_ok = false;
        return stage_ok;
      };

      if (make_stage([&](std::size_t i) { return T::a21 * k1[i]; })) {
        eval(t + T::c2 * step, stage, k2);
        if (make_stage([&](std::size_t i) { return T::a31 * k1[i] + T::a32 * k2[i]; })) {
          eval(t + T::c3 * step, stage, k3);
          if (make_stage([&](std::size_t i) {
                return T::a41 * k1[i] + T::a42 * k2[i] + T::a43 * k3[i];
              })) {
            eval(t + T::c4 * step, stage, k4);
            if (make_stage([&](std::size_t i) {
                  return T::a51 * k1[i] + T::a52 * k2[i] + T::a53 * k3[i] + T::a54 * k4[i];
                })) {
              eval(t + T::c5 * step, stage, k5);
              if (make_stage([&](std::size_t i) {
                    return T::a61 * k1[i] + T::a62 * k2[i] + T::a63 * k3[i] + T::a64 * k4[i] +
                           T::a65 * k5[i];
                  })) {
                eval(t + step, stage, k6);
                for (std::size_t i = 0; i < n; ++i)
                  y_new[i] = y[i] + step * (T::b1 * k1[i] + T::b3 * k3[i] + T::b4 * k4[i] +
                                            T::b5 * k5[i] + T::b6 * k6[i]);
                if (tol.require_positive && !detail::all_positive(y_new)) stage_ok = false;
              }
            }
          }
        }
      }

      if (!stage_ok) {
        ++local.rejected;
        h = 0.25 * step;
        continue;
      }

      eval(t + step, y_new, k7);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = step * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] +
                                 T::e6 * k6[i] + T::e7 * k7[i]);
        err = std::max(err, std::abs(e) / scale(y[i], y_new[i]));
      }
      if (!std::isfinite(err)) {
        ++local.rejected;
        h = 0.25 * step;
        continue;
      }

      const double factor =
          err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      if (err <= 1.0) {
        ++local.accepted;
        t = last ? target : t + step;
        y.swap(y_new);
        k1.swap(k7);
        // A step clipped to hit the output time says nothing about the
        // achievable step; keep the previous proposal in that case.
        h = last ? std::max(h, step * factor) : step * factor;
      } else {
        ++local.rejected;
        h = step * std::min(1.0, factor);
      }
    }
    out.push_back(y);
  }
  if (stats) *stats = local;
  return out;
}

/// Scalar convenience wrapper around integrate().
template <class Rhs>
std::vector<double> integrate_scalar(Rhs&& rhs, double t0, double y0,
                                     std::span<const double> t_out, const Tolerances& tol = {},
                                     Stats* stats = nullptr) {
  auto states = integrate(
      [&](double t, std::span<const double> y, std::span<double> dy) { dy[0] = rhs(t, y[0]); },
      t0, std::vector<double>{y0}, t_out, tol, stats);
  std::vector<double> result;
  result.reserve(states.size());
  for (const auto& s : states) result.push_back(s[0]);
  return result;
}

}  // namespace qsd::ode
