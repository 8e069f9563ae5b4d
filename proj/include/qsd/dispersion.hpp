#pragma once

// Gaussian-ansatz dispersion dynamics of a quantum Brownian particle.
//
// All solvers work in raw units of PhysicalParams. Time is measured from the
// moment the dispersion starts from its initial value; free-particle closed
// forms start from sigma2 = 0 at t = 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qsd/errors.hpp"
#include "qsd/model.hpp"
#include "qsd/ode.hpp"
#include "qsd/specfun.hpp"

namespace qsd::dispersion {

enum class Mode {
  beta_resolved,
  constant_sigma,
  relaxed,
  closed_form,
  log_law,
  early_power,
  elementary_approx,
};

inline constexpr Mode kAllModes[] = {Mode::beta_resolved, Mode::constant_sigma, Mode::relaxed,
                                     Mode::closed_form,   Mode::log_law,        Mode::early_power,
                                     Mode::elementary_approx};

inline constexpr std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::beta_resolved: return "beta_resolved";
    case Mode::constant_sigma: return "constant_sigma";
    case Mode::relaxed: return "relaxed";
    case Mode::closed_form: return "closed_form";
    case Mode::log_law: return "log_law";
    case Mode::early_power: return "early_power";
    case Mode::elementary_approx: return "elementary_approx";
  }
  return "unknown";
}

inline std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : kAllModes)
    if (to_string(m) == name) return m;
  return std::nullopt;
}

// Modes that only exist for the free particle, and those that need omega0 > 0.
inline constexpr bool requires_free(Mode m) {
  return m == Mode::closed_form || m == Mode::log_law || m == Mode::early_power ||
         m == Mode::elementary_approx;
}
inline constexpr bool requires_harmonic(Mode m) { return m == Mode::relaxed; }

struct DispersionTrajectory {
  std::vector<double> times;
  std::vector<double> sigma2;
  Mode mode = Mode::constant_sigma;
  PhysicalParams params;

  std::size_t size() const { return times.size(); }

  void validate() const {
    if (times.size() != sigma2.size())
      throw InputError("trajectory times and sigma2 differ in length");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw InputError("trajectory times not strictly increasing");
    for (std::size_t i = 0; i < sigma2.size(); ++i) {
      const bool origin = i == 0 && sigma2[i] == 0.0;
      if (!(sigma2[i] > 0.0) && !origin) throw InputError("trajectory has non-positive sigma2");
    }
  }
};

// ---------------------------------------------------------------------------
// Harmonic equilibria and the relaxed (classical-equilibrium) reduction.

/// Quantum canonical dispersion (hbar / 2 m w0) coth(beta hbar w0 / 2).
inline double equilibrium_dispersion_harmonic(const PhysicalParams& p) {
  p.validate();
  if (p.omega0 == 0.0)
    throw InputError("free particle has no equilibrium dispersion", "params.omega0");
  if (p.hbar == 0.0) return 1.0 / (p.beta * p.stiffness());
  const double u = 0.5 * p.beta * p.hbar * p.omega0;
  return p.hbar / (2.0 * p.mass * p.omega0) * specfun::coth_stable(u);
}

/// Fixed point (1 + beta^2 hbar^2 w0^2 / 12) / (beta m w0^2) of the relaxed equation.
inline double relaxed_fixed_point(const PhysicalParams& p) {
  const double u = p.beta * p.hbar * p.omega0;
  return (1.0 + u * u / 12.0) / (p.beta * p.stiffness());
}

inline double rhs_relaxed_harmonic(double sigma2, const PhysicalParams& p) {
  const double u = p.beta * p.hbar * p.omega0;
  return 2.0 * p.diffusion() * (1.0 + u * u / 12.0 - p.beta * p.stiffness() * sigma2);
}

inline double solve_relaxed_harmonic_analytic(double sigma2_0, double t, const PhysicalParams& p) {
  if (p.omega0 <= 0.0) throw InputError("relaxed solution needs omega0 > 0", "params.omega0");
  if (t < 0.0) throw InputError("time must be non-negative");
  const double target = relaxed_fixed_point(p);
  const double rate = 2.0 * p.diffusion() * p.beta * p.stiffness();
  return target + (sigma2_0 - target) * std::exp(-rate * t);
}

// ---------------------------------------------------------------------------
// Constant-sigma reduction: d sigma2/dt = 2D (1 + lambda_T^2 / sigma2 - beta m w0^2 sigma2).

inline double rhs_constant_sigma(double sigma2, const PhysicalParams& p) {
  if (!(sigma2 > 0.0)) throw SolverError("constant-sigma rate is singular at sigma2 <= 0");
  const double lt = p.thermal_length();
  return 2.0 * p.diffusion() * (1.0 + lt * lt / sigma2 - p.beta * p.stiffness() * sigma2);
}

/// Positive root of beta m w0^2 s^2 - s - lambda_T^2 = 0.
inline double constant_sigma_fixed_point(const PhysicalParams& p) {
  const double k = p.beta * p.stiffness();
  if (k <= 0.0) throw InputError("no fixed point without confinement", "params.omega0");
  const double lt = p.thermal_length();
  // 2 lambda^2 / (sqrt(1 + 4 k lambda^2) - 1) would cancel; use the stable root.
  return (1.0 + std::sqrt(1.0 + 4.0 * k * lt * lt)) / (2.0 * k);
}

// ---------------------------------------------------------------------------
// Free particle: exact constant-sigma solution and its asymptotic laws.

/// sigma2(t) = lambda_T^2 {-1 - W_{-1}[-exp(-1 - 2Dt/lambda_T^2)]}.
inline double solve_free_closed_form(double t, const PhysicalParams& p) {
  if (p.hbar == 0.0)
    throw InputError("closed form degenerates at hbar = 0; use 2Dt", "params.hbar");
  if (!(t >= 0.0)) throw InputError("time must be non-negative");
  const double lt = p.thermal_length();
  const double s = 2.0 * p.diffusion() * t / (lt * lt);
  return lt * lt * (-1.0 - specfun::lambert_wm1_neg_exp(s));
}

/// 2Dt + 2 lambda_T^2 ln(1 + sqrt(Dt) / lambda_T).
inline double elementary_approx_free(double t, const PhysicalParams& p) {
  if (!(t >= 0.0)) throw InputError("time must be non-negative");
  const double d = p.diffusion();
  const double lt = p.thermal_length();
  if (lt == 0.0) return 2.0 * d * t;
  return 2.0 * d * t + 2.0 * lt * lt * std::log1p(std::sqrt(d * t) / lt);
}

/// Semiclassical law 2Dt + lambda_T^2 ln t + c.
inline double log_law_free(double t, double c, const PhysicalParams& p) {
  if (!(t > 0.0)) throw InputError("log law needs t > 0");
  const double lt = p.thermal_length();
  return 2.0 * p.diffusion() * t + lt * lt * std::log(t) + c;
}

/// Least-squares constant of the log law against the closed form on a
/// geometric grid spanning [t_lo, t_hi]. The default window is
/// [10, 1000] crossover times, where the law is already asymptotic.
inline double fit_log_law_constant(const PhysicalParams& p, double t_lo = 0.0, double t_hi = 0.0,
                                   std::size_t samples = 64) {
  const auto sc = derived_scales(p);
  if (t_lo <= 0.0) t_lo = 10.0 * sc.crossover_time;
  if (t_hi <= 0.0) t_hi = 1000.0 * sc.crossover_time;
  if (!(t_hi > t_lo) || samples < 2) throw InputError("invalid log-law fit window");
  double sum = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(samples - 1);
    const double t = t_lo * std::pow(t_hi / t_lo, f);
    sum += solve_free_closed_form(t, p) - log_law_free(t, 0.0, p);
  }
  return sum / static_cast<double>(samples);
}

/// Early-time law sigma^4 = hbar^2 t / (m d(beta zeta)/d beta) with a
/// temperature-independent friction, for which d(beta zeta)/d beta = zeta.
inline double early_power_law(double t, const PhysicalParams& p) {
  if (p.hbar == 0.0) throw InputError("early-time law needs hbar > 0", "params.hbar");
  if (!(t >= 0.0)) throw InputError("time must be non-negative");
  return std::sqrt(p.hbar * p.hbar * t / (p.mass * p.friction));
}

/// Early-time law with the Arrhenius friction: d(beta zeta)/d beta = Ea / D.
inline double early_power_law(double t, const PhysicalParams& p, const ArrheniusModel& a) {
  if (p.hbar == 0.0) throw InputError("early-time law needs hbar > 0", "params.hbar");
  if (!(t >= 0.0)) throw InputError("time must be non-negative");
  const auto ad = arrhenius_diffusion(a, p.beta, p);
  if (!(ad.d_beta_beta_friction > 0.0)) throw InputError("d(beta zeta)/d beta must be positive");
  return std::sqrt(p.hbar * p.hbar * t / (p.mass * ad.d_beta_beta_friction));
}

/// Purely classical counterpart: sigma2_0 + 2Dt (free) or the
/// Ornstein-Uhlenbeck relaxation toward 1/(beta m w0^2).
inline double classical_dispersion(double t, double sigma2_0, const PhysicalParams& p) {
  if (p.is_free()) return sigma2_0 + 2.0 * p.diffusion() * t;
  const double k = p.beta * p.stiffness();
  return 1.0 / k + (sigma2_0 - 1.0 / k) * std::exp(-2.0 * p.diffusion() * k * t);
}

// ---------------------------------------------------------------------------
// Numeric integration of scalar dispersion equations.

/// Integrates d sigma2/dt = rhs(sigma2) from sigma2_0 at t_grid[0] and samples
/// the solution at every entry of t_grid.
template <class Rhs>
DispersionTrajectory integrate_dispersion_ode(Rhs&& rhs, double sigma2_0,
                                              std::span<const double> t_grid,
                                              const ode::Tolerances& tol = {},
                                              Mode mode = Mode::constant_sigma,
                                              const PhysicalParams& p = {}) {
  if (t_grid.empty()) throw InputError("empty time grid");
  if (tol.require_positive && !(sigma2_0 > 0.0))
    throw InputError("initial dispersion must be positive", "initial.sigma2");
  DispersionTrajectory traj;
  traj.mode = mode;
  traj.params = p;
  traj.times.assign(t_grid.begin(), t_grid.end());
  traj.sigma2 = ode::integrate_scalar([&](double, double s) { return rhs(s); }, t_grid[0],
                                      sigma2_0, t_grid, tol);
  return traj;
}

// Seed time for integrating the constant-sigma equation out of sigma2 = 0,
// in units of the crossover time.
inline constexpr double kSeedCrossoverFraction = 1e-8;

/// Constant-sigma reduction from sigma2_0 at t = t_grid[0] (free or harmonic).
/// A zero start is seeded from the exact free solution at 1e-8 crossover
/// times, where the confinement term is negligible.
inline DispersionTrajectory solve_constant_sigma(double sigma2_0, const PhysicalParams& p,
                                                 std::span<const double> t_grid,
                                                 const ode::Tolerances& tol = {}) {
  p.validate();
  if (t_grid.empty()) throw InputError("empty time grid");
  const auto sc = derived_scales(p);
  DispersionTrajectory traj;
  traj.mode = Mode::constant_sigma;
  traj.params = p;
  traj.times.assign(t_grid.begin(), t_grid.end());

  if (p.hbar == 0.0) {
    auto t = tol;
    t.require_positive = false;
    const double rate = p.beta * p.stiffness();
    traj.sigma2 = ode::integrate_scalar(
        [&](double, double s) { return 2.0 * p.diffusion() * (1.0 - rate * s); }, t_grid[0],
        sigma2_0, t_grid, t);
    return traj;
  }

  auto rhs = [&](double, double s) { return rhs_constant_sigma(s, p); };
  if (sigma2_0 > 0.0) {
    traj.sigma2 = ode::integrate_scalar(rhs, t_grid[0], sigma2_0, t_grid, tol);
    return traj;
  }
  if (sigma2_0 < 0.0) throw InputError("initial dispersion must be >= 0", "initial.sigma2");

  const double t0 = t_grid[0];
  const double seed_dt = kSeedCrossoverFraction * sc.crossover_time;
  PhysicalParams free = p;
  free.omega0 = 0.0;
  std::vector<double> later;
  for (double t : t_grid)
    if (t - t0 > seed_dt) later.push_back(t);
  const std::size_t early = t_grid.size() - later.size();
  for (std::size_t i = 0; i < early; ++i)
    traj.sigma2.push_back(solve_free_closed_form(t_grid[i] - t0, free));
  if (!later.empty()) {
    const auto tail = ode::integrate_scalar(rhs, t0 + seed_dt,
                                            solve_free_closed_form(seed_dt, free), later, tol);
    traj.sigma2.insert(traj.sigma2.end(), tail.begin(), tail.end());
  }
  return traj;
}

inline DispersionTrajectory solve_relaxed_harmonic(double sigma2_0, const PhysicalParams& p,
                                                   std::span<const double> t_grid,
                                                   const ode::Tolerances& tol = {}) {
  p.validate();
  if (p.omega0 <= 0.0) throw InputError("relaxed mode needs omega0 > 0", "params.omega0");
  auto t = tol;
  t.require_positive = false;
  auto traj = integrate_dispersion_ode([&](double s) { return rhs_relaxed_harmonic(s, p); },
                                       sigma2_0, t_grid, t, Mode::relaxed, p);
  for (double s : traj.sigma2)
    if (s < 0.0) throw SolverError("relaxed dispersion became negative");
  return traj;
}

// ---------------------------------------------------------------------------
// Beta-resolved family.
//
// Each member at inverse temperature b in (beta_min, beta] obeys
//   d sigma2_b/dt = 2 D(b) (1 + sigma2_b I_b - b m w0^2 sigma2_b),  D(b) = 1/(b zeta),
//   I_b = int_0^b hbar^2 / (4 m sigma2_c^2) dc,
// with the integral taken by the trapezoid rule on the grid and the integrand
// held constant on [0, beta_min].

struct BetaGrid {
  double beta_min = 0.0;  // 0 selects beta / (4 n_beta)
  std::size_t n_beta = 256;
};

struct BetaFamilyState {
  std::vector<double> beta_grid;
  std::vector<double> sigma2_field;
};

enum class InitialProfile { uniform, coth_equilibrium };

struct BetaResolvedOptions {
  BetaGrid grid;
  InitialProfile profile = InitialProfile::uniform;
  ode::Tolerances tolerances;
  bool check_resolution = false;  // rerun with 2 n_beta and warn on > 1e-4 change
  bool keep_history = true;
};

struct BetaResolvedResult {
  DispersionTrajectory trajectory;
  std::vector<BetaFamilyState> history;  // one per output time when kept
  std::vector<std::string> warnings;
  double resolution_change = 0.0;  // relative change of final sigma2 under refinement
};

inline std::vector<double> make_beta_grid(double beta, const BetaGrid& g) {
  if (g.n_beta < 16) throw InputError("n_beta must be at least 16", "grid.n_beta");
  const double n = static_cast<double>(g.n_beta);
  const double beta_min = g.beta_min > 0.0 ? g.beta_min : beta / (4.0 * n);
  if (!(beta_min > 0.0) || beta_min > beta / n * (1.0 + 1e-12))
    throw InputError("beta_min must lie in (0, beta/n_beta]", "grid.beta_min");
  std::vector<double> grid(g.n_beta);
  const double step = (beta - beta_min) / (n - 1.0);
  for (std::size_t j = 0; j < g.n_beta; ++j) grid[j] = beta_min + step * static_cast<double>(j);
  grid.back() = beta;
  return grid;
}

/// Time derivative of every family member for the given field.
inline void beta_family_rates(std::span<const double> beta_grid, std::span<const double> sigma2,
                              const PhysicalParams& p, std::span<double> rates) {
  const std::size_t n = beta_grid.size();
  const double c = p.hbar * p.hbar / (4.0 * p.mass);
  const double k = p.stiffness();
  auto integrand = [&](std::size_t j) { return c / (sigma2[j] * sigma2[j]); };
  double f_prev = integrand(0);
  double integral = beta_grid[0] * f_prev;
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0) {
      const double f = integrand(j);
      integral += 0.5 * (beta_grid[j] - beta_grid[j - 1]) * (f_prev + f);
      f_prev = f;
    }
    const double b = beta_grid[j];
    const double d = 1.0 / (b * p.friction);
    rates[j] = 2.0 * d * (1.0 + sigma2[j] * integral - b * k * sigma2[j]);
  }
}

inline std::vector<double> beta_family_rates(const BetaFamilyState& s, const PhysicalParams& p) {
  std::vector<double> rates(s.beta_grid.size());
  beta_family_rates(s.beta_grid, s.sigma2_field, p, rates);
  return rates;
}

/// Family initialised with the quantum canonical dispersion of each member.
inline BetaFamilyState coth_profile(const PhysicalParams& p, const BetaGrid& g) {
  BetaFamilyState s;
  s.beta_grid = make_beta_grid(p.beta, g);
  s.sigma2_field.reserve(s.beta_grid.size());
  for (double b : s.beta_grid) {
    PhysicalParams q = p;
    q.beta = b;
    s.sigma2_field.push_back(equilibrium_dispersion_harmonic(q));
  }
  return s;
}

inline BetaResolvedResult solve_beta_resolved(double sigma2_0, const PhysicalParams& p,
                                              std::span<const double> t_grid,
                                              const BetaResolvedOptions& opt = {}) {
  p.validate();
  if (t_grid.empty()) throw InputError("empty time grid");
  BetaFamilyState init;
  if (opt.profile == InitialProfile::coth_equilibrium) {
    if (p.omega0 <= 0.0 || p.hbar <= 0.0)
      throw InputError("coth profile needs omega0 > 0 and hbar > 0", "params.omega0");
    init = coth_profile(p, opt.grid);
  } else {
    if (!(sigma2_0 > 0.0))
      throw InputError("beta-resolved family needs a positive initial dispersion",
                       "initial.sigma2");
    init.beta_grid = make_beta_grid(p.beta, opt.grid);
    init.sigma2_field.assign(init.beta_grid.size(), sigma2_0);
  }

  auto tol = opt.tolerances;
  tol.require_positive = true;
  const auto& grid = init.beta_grid;
  std::vector<std::vector<double>> states;
  try {
    states = ode::integrate(
        [&](double, std::span<const double> y, std::span<double> dy) {
          beta_family_rates(grid, y, p, dy);
        },
        t_grid[0], init.sigma2_field, t_grid, tol);
  } catch (const SolverError& e) {
    throw SolverError(std::string("beta-resolved family: ") + e.what());
  }

  BetaResolvedResult r;
  r.trajectory.mode = Mode::beta_resolved;
  r.trajectory.params = p;
  r.trajectory.times.assign(t_grid.begin(), t_grid.end());
  for (auto& s : states) {
    r.trajectory.sigma2.push_back(s.back());
    if (opt.keep_history) r.history.push_back({grid, std::move(s)});
  }

  if (opt.check_resolution) {
    auto fine = opt;
    fine.check_resolution = false;
    fine.keep_history = false;
    fine.grid.n_beta = 2 * opt.grid.n_beta;
    fine.grid.beta_min = 0.5 * grid.front();
    const auto refined = solve_beta_resolved(sigma2_0, p, t_grid, fine);
    const double a = r.trajectory.sigma2.back();
    const double b = refined.trajectory.sigma2.back();
    r.resolution_change = std::abs(a - b) / std::max(std::abs(a), std::abs(b));
    if (r.resolution_change > 1e-4)
      r.warnings.push_back("beta quadrature under-resolved: doubling n_beta changes the final "
                           "sigma2 by " + std::to_string(r.resolution_change));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Mode dispatch.

struct ModeOptions {
  ode::Tolerances tolerances;
  BetaResolvedOptions beta;
  std::optional<ArrheniusModel> arrhenius;  // early_power friction model
  std::optional<double> log_law_constant;   // fitted when absent
};

struct ModeResult {
  DispersionTrajectory trajectory;
  std::vector<std::string> warnings;
  double log_law_constant = 0.0;  // set for Mode::log_law
};

/// Samples one dispersion mode on t_grid. Analytic free-particle laws take
/// t_grid as elapsed time and ignore sigma2_0.
inline ModeResult solve_mode(Mode mode, double sigma2_0, const PhysicalParams& p,
                             std::span<const double> t_grid, const ModeOptions& opt = {}) {
  p.validate();
  if (requires_free(mode) && !p.is_free())
    throw InputError(std::string(to_string(mode)) + " requires a free particle (omega0 = 0)",
                     "modes");
  if (requires_harmonic(mode) && p.is_free())
    throw InputError(std::string(to_string(mode)) + " requires omega0 > 0", "modes");

  ModeResult r;
  auto sample = [&](auto&& f) {
    r.trajectory.mode = mode;
    r.trajectory.params = p;
    r.trajectory.times.assign(t_grid.begin(), t_grid.end());
    for (double t : t_grid) r.trajectory.sigma2.push_back(f(t));
  };

  switch (mode) {
    case Mode::beta_resolved: {
      auto res = solve_beta_resolved(sigma2_0, p, t_grid, opt.beta);
      r.trajectory = std::move(res.trajectory);
      r.warnings = std::move(res.warnings);
      break;
    }
    case Mode::constant_sigma:
      r.trajectory = solve_constant_sigma(sigma2_0, p, t_grid, opt.tolerances);
      break;
    case Mode::relaxed:
      r.trajectory = solve_relaxed_harmonic(sigma2_0, p, t_grid, opt.tolerances);
      break;
    case Mode::closed_form:
      sample([&](double t) { return solve_free_closed_form(t, p); });
      break;
    case Mode::elementary_approx:
      sample([&](double t) { return elementary_approx_free(t, p); });
      break;
    case Mode::log_law: {
      const double c = opt.log_law_constant ? *opt.log_law_constant : fit_log_law_constant(p);
      r.log_law_constant = c;
      sample([&](double t) { return log_law_free(t, c, p); });
      break;
    }
    case Mode::early_power:
      if (opt.arrhenius)
        sample([&](double t) { return early_power_law(t, p, *opt.arrhenius); });
      else
        sample([&](double t) { return early_power_law(t, p); });
      break;
  }
  return r;
}

}  // namespace qsd::dispersion
