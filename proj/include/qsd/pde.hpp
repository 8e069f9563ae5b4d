#pragma once

// Finite-volume solvers for the semiclassical Smoluchowski equations
//
//   dP/dt = d/dx [ P U'(x) / zeta + d/dx (D_eff(x) P) ],
//   D_eff = D (1 + beta^2 hbar^2 V'' / 12m),
//
// with U = V (coffey form) or U = V + beta hbar^2 V'' / 24m (ankerhold form).
// The diffusion term keeps the d/dx d/dx (D_eff P) ordering. Nodes are
// vertex-centred with half control volumes at the two reflecting walls, so the
// trapezoid mass is conserved exactly by the flux form.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qsd/errors.hpp"
#include "qsd/model.hpp"

namespace qsd::pde {

enum class Form { coffey, ankerhold };

inline constexpr std::string_view to_string(Form f) {
  return f == Form::coffey ? "coffey" : "ankerhold";
}

inline std::optional<Form> parse_form(std::string_view name) {
  if (name == "coffey") return Form::coffey;
  if (name == "ankerhold") return Form::ankerhold;
  return std::nullopt;
}

struct Grid {
  double x_lo = -8.0;
  double x_hi = 8.0;
  std::size_t n = 1024;

  void validate() const {
    if (n < 64) throw InputError("grid needs at least 64 points", "grid.n");
    if (!(x_hi > x_lo) || !std::isfinite(x_lo) || !std::isfinite(x_hi))
      throw InputError("grid needs finite x_lo < x_hi", "grid.x_hi");
  }

  double dx() const { return (x_hi - x_lo) / static_cast<double>(n - 1); }
  double x(std::size_t i) const { return x_lo + dx() * static_cast<double>(i); }

  // Trapezoid weight of node i.
  double weight(std::size_t i) const { return (i == 0 || i + 1 == n) ? 0.5 * dx() : dx(); }
};

struct GridState {
  Grid grid;
  std::vector<double> density;
  double t = 0.0;
};

struct Moments {
  double norm = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

inline double integrate(const Grid& g, const std::vector<double>& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) s += g.weight(i) * f[i];
  return s;
}

/// Trapezoid-rule norm, mean and variance (the latter two per unit norm).
inline Moments moments(const GridState& s) {
  const Grid& g = s.grid;
  Moments m;
  double first = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    m.norm += g.weight(i) * s.density[i];
    first += g.weight(i) * g.x(i) * s.density[i];
  }
  m.mean = first / m.norm;
  double second = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    const double dxm = g.x(i) - m.mean;
    second += g.weight(i) * dxm * dxm * s.density[i];
  }
  m.variance = second / m.norm;
  return m;
}

inline double min_density(const GridState& s) {
  return *std::min_element(s.density.begin(), s.density.end());
}

/// Trapezoid L1 distance between two states on the same grid.
inline double l1_distance(const GridState& a, const GridState& b) {
  if (a.grid.n != b.grid.n) throw InputError("states live on different grids");
  double s = 0.0;
  for (std::size_t i = 0; i < a.grid.n; ++i)
    s += a.grid.weight(i) * std::abs(a.density[i] - b.density[i]);
  return s;
}

inline void normalize(GridState& s) {
  const double norm = integrate(s.grid, s.density);
  if (!(norm > 0.0)) throw SolverError("cannot normalise a density with zero mass");
  for (double& p : s.density) p /= norm;
}

/// Normalised Gaussian sampled on the grid.
inline GridState gaussian_state(const Grid& g, double mean, double variance) {
  g.validate();
  if (!(variance > 0.0)) throw InputError("initial variance must be positive", "initial.sigma2");
  GridState s{g, std::vector<double>(g.n), 0.0};
  for (std::size_t i = 0; i < g.n; ++i) {
    const double z = g.x(i) - mean;
    s.density[i] = std::exp(-0.5 * z * z / variance);
  }
  normalize(s);
  return s;
}

struct EffectiveFields {
  Grid grid;
  Form form = Form::coffey;
  std::vector<double> d_eff;
  std::vector<double> v_eff_prime;
  bool valid = true;  // every d_eff > 0
  double min_d_eff = 0.0;
  std::vector<std::string> warnings;
};

inline EffectiveFields build_effective_fields(const Potential& v, const PhysicalParams& p,
                                              Form form, const Grid& grid) {
  p.validate();
  grid.validate();
  EffectiveFields f;
  f.grid = grid;
  f.form = form;
  f.d_eff.resize(grid.n);
  f.v_eff_prime.resize(grid.n);
  const double d = p.diffusion();
  const double curvature = p.beta * p.beta * p.hbar * p.hbar / (12.0 * p.mass);
  const double drift_shift = p.beta * p.hbar * p.hbar / (24.0 * p.mass);
  if (form == Form::ankerhold && !v.third_derivative_exact())
    f.warnings.push_back("third derivative of tabulated potential taken by an extra central "
                         "difference");
  for (std::size_t i = 0; i < grid.n; ++i) {
    const double x = grid.x(i);
    f.d_eff[i] = d * (1.0 + curvature * v.second(x));
    f.v_eff_prime[i] = v.first(x);
    if (form == Form::ankerhold) f.v_eff_prime[i] += drift_shift * v.third(x);
  }
  f.min_d_eff = *std::min_element(f.d_eff.begin(), f.d_eff.end());
  f.valid = f.min_d_eff > 0.0;
  if (!f.valid) f.warnings.push_back("semiclassical validity violated: D_eff <= 0 on the grid");
  return f;
}

/// Zero-flux stationary density P ~ exp(-int U'/(zeta D_eff)) / D_eff by
/// cumulative trapezoid quadrature, normalised on the grid.
inline GridState stationary_solution_oracle(const EffectiveFields& f, const PhysicalParams& p) {
  const Grid& g = f.grid;
  for (double d : f.d_eff)
    if (!(d > 0.0)) throw SolverError("stationary solution needs D_eff > 0 everywhere");
  std::vector<double> exponent(g.n, 0.0);
  const double dx = g.dx();
  auto slope = [&](std::size_t i) { return f.v_eff_prime[i] / (p.friction * f.d_eff[i]); };
  for (std::size_t i = 1; i < g.n; ++i)
    exponent[i] = exponent[i - 1] + 0.5 * dx * (slope(i - 1) + slope(i));
  const double lowest = *std::min_element(exponent.begin(), exponent.end());
  GridState s{g, std::vector<double>(g.n), 0.0};
  for (std::size_t i = 0; i < g.n; ++i) s.density[i] = std::exp(-(exponent[i] - lowest)) / f.d_eff[i];
  normalize(s);
  return s;
}

struct DtPolicy {
  double cfl_diffusion = 0.4;  // dt <= c dx^2 / max D_eff
  double cfl_drift = 0.4;      // dt <= c dx zeta / max |U'|
  bool allow_invalid = false;  // clamp D_eff >= clamp_fraction * D instead of failing
  double clamp_fraction = 1e-3;
};

struct EvolveStats {
  std::size_t steps = 0;
  double dt = 0.0;
  double min_density = 0.0;
  bool clamped = false;
};

inline constexpr double kNegativeDensityLimit = -1e-8;

namespace detail {

// dP/dt for the flux form; `q` and `flux` are scratch buffers.
inline void rates(const std::vector<double>& density, const std::vector<double>& d_eff,
                  const std::vector<double>& drift, double dx, std::vector<double>& q,
                  std::vector<double>& flux, std::vector<double>& out) {
  const std::size_t n = density.size();
  for (std::size_t i = 0; i < n; ++i) q[i] = d_eff[i] * density[i];
  const double inv_dx = 1.0 / dx;
  for (std::size_t i = 0; i + 1 < n; ++i)
    flux[i] = 0.5 * (drift[i] * density[i] + drift[i + 1] * density[i + 1]) +
              (q[i + 1] - q[i]) * inv_dx;
  out[0] = 2.0 * flux[0] * inv_dx;
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (flux[i] - flux[i - 1]) * inv_dx;
  out[n - 1] = -2.0 * flux[n - 2] * inv_dx;
}

}  // namespace detail

/// Advances `state` to t_end with Heun (SSP-RK2) steps under the CFL bounds.
/// Throws SolverError when D_eff <= 0 without the override, or when the
/// density undershoots -1e-8.
inline GridState evolve(GridState state, const EffectiveFields& fields, const PhysicalParams& p,
                        double t_end, const DtPolicy& policy = {}, EvolveStats* stats = nullptr) {
  const Grid& g = state.grid;
  if (g.n != fields.grid.n || g.x_lo != fields.grid.x_lo || g.x_hi != fields.grid.x_hi)
    throw InputError("state and fields live on different grids");
  if (t_end < state.t) throw InputError("t_end precedes the state time");

  EvolveStats st;
  std::vector<double> d_eff = fields.d_eff;
  if (!fields.valid) {
    if (!policy.allow_invalid)
      throw SolverError("semiclassical validity violated: D_eff <= 0 (min " +
                        std::to_string(fields.min_d_eff) + ")");
    const double floor = policy.clamp_fraction * p.diffusion();
    for (double& d : d_eff) d = std::max(d, floor);
    st.clamped = true;
  }
  std::vector<double> drift(g.n);
  double max_drift = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    drift[i] = fields.v_eff_prime[i] / p.friction;
    max_drift = std::max(max_drift, std::abs(drift[i]));
  }
  const double dx = g.dx();
  const double max_d = *std::max_element(d_eff.begin(), d_eff.end());
  double dt = policy.cfl_diffusion * dx * dx / max_d;
  if (max_drift > 0.0) dt = std::min(dt, policy.cfl_drift * dx / max_drift);
  st.dt = dt;

  std::vector<double> q(g.n), flux(g.n), k1(g.n), k2(g.n), stage(g.n);
  auto& P = state.density;
  st.min_density = min_density(state);
  while (state.t < t_end) {
    const double remaining = t_end - state.t;
    const bool last = remaining <= dt * (1.0 + 1e-12);
    const double h = last ? remaining : dt;
    detail::rates(P, d_eff, drift, dx, q, flux, k1);
    for (std::size_t i = 0; i < g.n; ++i) stage[i] = P[i] + h * k1[i];
    detail::rates(stage, d_eff, drift, dx, q, flux, k2);
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.n; ++i) {
      P[i] = 0.5 * (P[i] + stage[i] + h * k2[i]);
      lowest = std::min(lowest, P[i]);
    }
    state.t = last ? t_end : state.t + h;
    ++st.steps;
    st.min_density = std::min(st.min_density, lowest);
    if (lowest < kNegativeDensityLimit)
      throw SolverError("negative density " + std::to_string(lowest) + " at t = " +
                        std::to_string(state.t));
  }
  if (stats) *stats = st;
  return state;
}

}  // namespace qsd::pde
