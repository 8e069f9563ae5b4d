#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsd/errors.hpp"

namespace qsd {

// Physical parameters of the Brownian particle. All values in one consistent
// unit system with k_B = 1, so beta is an inverse energy.
struct PhysicalParams {
  double mass = 1.0;
  double friction = 1.0;
  double beta = 1.0;
  double hbar = 1.0;
  double omega0 = 0.0;  // 0 selects the free particle

  void validate() const {
    if (!(mass > 0.0) || !std::isfinite(mass))
      throw InputError("mass must be positive and finite", "params.mass");
    if (!(friction > 0.0) || !std::isfinite(friction))
      throw InputError("friction must be positive and finite", "params.friction");
    if (!(beta > 0.0) || !std::isfinite(beta))
      throw InputError("beta must be positive and finite", "params.beta");
    if (!(hbar >= 0.0) || !std::isfinite(hbar))
      throw InputError("hbar must be non-negative and finite", "params.hbar");
    if (!(omega0 >= 0.0) || !std::isfinite(omega0))
      throw InputError("omega0 must be non-negative and finite", "params.omega0");
  }

  bool is_free() const { return omega0 == 0.0; }

  // Einstein diffusion constant k_B T / friction.
  double diffusion() const { return 1.0 / (beta * friction); }

  // hbar / (2 sqrt(m k_B T)).
  double thermal_length() const { return hbar * std::sqrt(beta) / (2.0 * std::sqrt(mass)); }

  // Stiffness m*omega0^2 of the harmonic confinement.
  double stiffness() const { return mass * omega0 * omega0; }
};

struct DerivedScales {
  double diffusion = 0.0;
  double thermal_length = 0.0;
  double crossover_time = 0.0;  // time at which 2Dt equals lambda_T^2
};

inline DerivedScales derived_scales(const PhysicalParams& p) {
  p.validate();
  const double d = p.diffusion();
  const double lt = p.thermal_length();
  return {d, lt, lt * lt / (2.0 * d)};
}

// Arrhenius law D(beta) = D0 exp(-beta Ea) for the temperature dependence
// of the diffusion constant.
struct ArrheniusModel {
  double prefactor = 1.0;        // D0
  double activation_energy = 1.0;  // Ea

  void validate() const {
    if (!(prefactor > 0.0) || !std::isfinite(prefactor))
      throw InputError("Arrhenius prefactor must be positive", "arrhenius.D0");
    if (!(activation_energy > 0.0) || !std::isfinite(activation_energy))
      throw InputError("activation energy must be positive", "arrhenius.Ea");
  }

  // hbar / (2 sqrt(m Ea)): the de Broglie length of the activation energy.
  double activation_length(double mass, double hbar) const {
    return hbar / (2.0 * std::sqrt(mass * activation_energy));
  }
};

struct ArrheniusDiffusion {
  double diffusion = 0.0;
  double friction = 0.0;
  double activation_length = 0.0;
  double d_beta_beta_friction = 0.0;  // d(beta*zeta)/dbeta = Ea / D
};

/// Evaluates the Arrhenius model at inverse temperature `beta`; mass and hbar
/// come from `p`. Throws InputError when beta*Ea would overflow the exponent.
inline ArrheniusDiffusion arrhenius_diffusion(const ArrheniusModel& a, double beta,
                                              const PhysicalParams& p) {
  a.validate();
  if (!(beta > 0.0)) throw InputError("beta must be positive", "params.beta");
  if (beta * a.activation_energy > 700.0)
    throw InputError("beta*Ea exceeds 700; exp(beta*Ea) would overflow", "arrhenius.Ea");
  ArrheniusDiffusion r;
  r.diffusion = a.prefactor * std::exp(-beta * a.activation_energy);
  r.friction = 1.0 / (beta * r.diffusion);
  r.activation_length = a.activation_length(p.mass, p.hbar);
  r.d_beta_beta_friction = a.activation_energy / r.diffusion;
  return r;
}

// External potential V(x) with derivatives up to third order.
//
// Polynomials are evaluated exactly from their coefficients. Tabulated
// potentials carry derivatives at the nodes from second-order central
// differences (one-sided second-order at the ends) and interpolate linearly
// between nodes.
class Potential {
 public:
  static constexpr std::size_t kMaxDegree = 8;
  static constexpr std::size_t kMinSamples = 9;

  enum class Form { polynomial, tabulated };

  Potential() : Potential(polynomial({})) {}

  /// V(x) = sum_k coefficients[k] x^k, degree at most 8.
  static Potential polynomial(std::vector<double> coefficients) {
    if (coefficients.size() > kMaxDegree + 1)
      throw InputError("polynomial potential degree exceeds 8", "potential.coefficients");
    for (double c : coefficients)
      if (!std::isfinite(c))
        throw InputError("non-finite polynomial coefficient", "potential.coefficients");
    Potential v(Form::polynomial);
    v.coeffs_ = std::move(coefficients);
    return v;
  }

  static Potential harmonic(double mass, double omega0) {
    return polynomial({0.0, 0.0, 0.5 * mass * omega0 * omega0});
  }

  /// a x^4 - b x^2.
  static Potential double_well(double a, double b) {
    return polynomial({0.0, 0.0, -b, 0.0, a});
  }

  /// Samples of V on a uniform grid spanning [x_lo, x_hi].
  static Potential tabulated(double x_lo, double x_hi, std::vector<double> samples) {
    if (samples.size() < kMinSamples)
      throw InputError("tabulated potential needs at least 9 samples", "potential.samples");
    if (!(x_hi > x_lo))
      throw InputError("tabulated potential needs x_hi > x_lo", "potential.x_hi");
    Potential v(Form::tabulated);
    v.x_lo_ = x_lo;
    v.x_hi_ = x_hi;
    v.h_ = (x_hi - x_lo) / static_cast<double>(samples.size() - 1);
    v.table_[0] = std::move(samples);
    v.table_[1] = first_difference(v.table_[0], v.h_);
    v.table_[2] = second_difference(v.table_[0], v.h_);
    v.table_[3] = first_difference(v.table_[2], v.h_);
    return v;
  }

  Form form() const { return form_; }
  const std::vector<double>& coefficients() const { return coeffs_; }

  double lower_bound() const { return x_lo_; }
  double upper_bound() const { return x_hi_; }

  // Tabulated third derivatives are one more central difference applied to
  // the tabulated second derivative.
  bool third_derivative_exact() const { return form_ == Form::polynomial; }

  double value(double x) const { return derivative(0, x); }
  double first(double x) const { return derivative(1, x); }
  double second(double x) const { return derivative(2, x); }
  double third(double x) const { return derivative(3, x); }

  double derivative(int order, double x) const {
    if (form_ == Form::polynomial) return poly_derivative(order, x);
    return interpolate(table_[static_cast<std::size_t>(order)], x);
  }

 private:
  explicit Potential(Form f) : form_(f) {}

  double poly_derivative(int order, double x) const {
    double acc = 0.0;
    for (std::size_t k = coeffs_.size(); k-- > static_cast<std::size_t>(order);) {
      double factor = 1.0;
      for (int j = 0; j < order; ++j) factor *= static_cast<double>(k - static_cast<std::size_t>(j));
      acc = acc * x + factor * coeffs_[k];
    }
    return acc;
  }

  static std::vector<double> first_difference(const std::vector<double>& f, double h) {
    const std::size_t n = f.size();
    std::vector<double> d(n);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    return d;
  }

  static std::vector<double> second_difference(const std::vector<double>& f, double h) {
    const std::size_t n = f.size();
    const double h2 = h * h;
    std::vector<double> d(n);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    return d;
  }

  double interpolate(const std::vector<double>& f, double x) const {
    const double s = std::clamp((x - x_lo_) / h_, 0.0, static_cast<double>(f.size() - 1));
    const std::size_t i = std::min(static_cast<std::size_t>(s), f.size() - 2);
    const double frac = s - static_cast<double>(i);
    return f[i] + frac * (f[i + 1] - f[i]);
  }

  Form form_;
  std::vector<double> coeffs_;
  double x_lo_ = -std::numeric_limits<double>::infinity();
  double x_hi_ = std::numeric_limits<double>::infinity();
  double h_ = 0.0;
  std::array<std::vector<double>, 4> table_;
};

}  // namespace qsd
