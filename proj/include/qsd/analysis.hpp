#pragma once

// Regime diagnostics: local diffusion exponents, crossover scales and
// trajectory comparison.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qsd/dispersion.hpp"
#include "qsd/errors.hpp"
#include "qsd/model.hpp"

namespace qsd::analysis {

using dispersion::DispersionTrajectory;

// Local exponent of sigma (not sigma^2) at the interior points of a trajectory.
struct ExponentSeries {
  std::vector<double> times;
  std::vector<double> alpha;
};

/// alpha_i = 1/2 d ln sigma2 / d ln t by centred differences in log-log space.
inline ExponentSeries local_exponent(std::span<const double> times, std::span<const double> sigma2) {
  if (times.size() != sigma2.size()) throw InputError("times and sigma2 differ in length");
  if (times.size() < 3) throw InputError("local exponent needs at least 3 points");
  for (std::size_t i = 0; i < times.size(); ++i)
    if (!(times[i] > 0.0) || !(sigma2[i] > 0.0))
      throw InputError("local exponent needs positive times and dispersions");
  ExponentSeries e;
  for (std::size_t i = 1; i + 1 < times.size(); ++i) {
    const double dl = std::log(times[i + 1]) - std::log(times[i - 1]);
    const double ds = std::log(sigma2[i + 1]) - std::log(sigma2[i - 1]);
    e.times.push_back(times[i]);
    e.alpha.push_back(0.5 * ds / dl);
  }
  return e;
}

inline ExponentSeries local_exponent(const DispersionTrajectory& traj) {
  return local_exponent(traj.times, traj.sigma2);
}

/// Least-squares slope of 1/2 ln sigma2 against ln t over the given points,
/// skipping samples with t <= 0 or sigma2 <= 0.
inline double fitted_exponent(std::span<const double> times, std::span<const double> sigma2) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0) || !(sigma2[i] > 0.0)) continue;
    const double x = std::log(times[i]);
    const double y = 0.5 * std::log(sigma2[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++n;
  }
  if (n < 2) throw InputError("exponent fit needs at least two positive samples");
  const double nn = static_cast<double>(n);
  const double denom = nn * sxx - sx * sx;
  if (denom == 0.0) throw InputError("exponent fit needs distinct times");
  return (nn * sxy - sx * sy) / denom;
}

struct CrossoverScales {
  double crossover_time = 0.0;
  double thermal_length = 0.0;
  std::optional<double> activation_length;
  // sigma2 at which the quantum term of the constant-sigma rate falls to 10 %
  // of the classical one: 10 lambda_T^2.
  double quantum_tail_sigma2 = 0.0;
};

inline CrossoverScales crossover_scales(const PhysicalParams& p,
                                        const std::optional<ArrheniusModel>& a = std::nullopt) {
  const auto sc = derived_scales(p);
  CrossoverScales c;
  c.crossover_time = sc.crossover_time;
  c.thermal_length = sc.thermal_length;
  c.quantum_tail_sigma2 = 10.0 * sc.thermal_length * sc.thermal_length;
  if (a) {
    a->validate();
    c.activation_length = a->activation_length(p.mass, p.hbar);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Monotone cubic (Fritsch-Carlson) interpolation.

class MonotoneCubic {
 public:
  MonotoneCubic(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw InputError("monotone interpolation needs >= 2 points");
    std::vector<double> secant(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (!(x_[i + 1] > x_[i])) throw InputError("interpolation abscissae not increasing");
      secant[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    }
    slope_.resize(n);
    slope_[0] = secant[0];
    slope_[n - 1] = secant[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (secant[i - 1] * secant[i] <= 0.0) {
        slope_[i] = 0.0;
      } else {
        // Weighted harmonic mean (Fritsch-Butland), stays within the monotone region.
        const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
        const double w0 = 2 * h1 + h0, w1 = h1 + 2 * h0;
        slope_[i] = (w0 + w1) / (w0 / secant[i - 1] + w1 / secant[i]);
      }
    }
  }

  double operator()(double x) const {
    const std::size_t n = x_.size();
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    i = std::min(i, n - 2);
    const double h = x_[i + 1] - x_[i];
    const double s = (x - x_[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * slope_[i] +
           (-2 * s3 + 3 * s2) * y_[i + 1] + (s3 - s2) * h * slope_[i + 1];
  }

 private:
  std::vector<double> x_, y_, slope_;
};

// ---------------------------------------------------------------------------
// Trajectory comparison.

struct ComparisonMetrics {
  double max_rel_err = 0.0;
  double l2_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t points = 0;
  bool resampled = false;  // b was interpolated onto a's grid
};

namespace detail {

inline ComparisonMetrics compare_samples(std::span<const double> a, std::span<const double> b) {
  ComparisonMetrics m;
  double diff2 = 0.0, a2 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    const double ref = std::max({std::abs(a[i]), std::abs(b[i]), 1e-300});
    m.max_abs_err = std::max(m.max_abs_err, d);
    m.max_rel_err = std::max(m.max_rel_err, d / ref);
    diff2 += d * d;
    a2 += a[i] * a[i];
    b2 += b[i] * b[i];
  }
  m.l2_rel_err = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(b2), 1e-300});
  m.points = a.size();
  return m;
}

}  // namespace detail

/// Pointwise error metrics between two trajectories. Relative errors are taken
/// against max(|a|, |b|), so they are symmetric in the arguments. When the time
/// grids differ, b is resampled onto a's times within the common range by
/// monotone cubic interpolation of ln sigma2 against ln t.
inline ComparisonMetrics compare_trajectories(const DispersionTrajectory& a,
                                              const DispersionTrajectory& b) {
  if (a.times.empty() || b.times.empty()) throw InputError("cannot compare empty trajectories");
  if (a.times == b.times) return detail::compare_samples(a.sigma2, b.sigma2);

  std::vector<double> lt, ls;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b.times[i] > 0.0 && b.sigma2[i] > 0.0) {
      lt.push_back(std::log(b.times[i]));
      ls.push_back(std::log(b.sigma2[i]));
    }
  }
  if (lt.size() < 2) throw InputError("trajectories have no overlapping time range");
  const MonotoneCubic interp(lt, ls);
  const double lo = std::exp(lt.front()), hi = std::exp(lt.back());

  std::vector<double> av, bv;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a.times[i];
    if (t < lo || t > hi) continue;
    av.push_back(a.sigma2[i]);
    bv.push_back(std::exp(interp(std::log(t))));
  }
  if (av.empty()) throw InputError("trajectories have no overlapping time range");
  auto m = detail::compare_samples(av, bv);
  m.resampled = true;
  return m;
}

}  // namespace qsd::analysis
