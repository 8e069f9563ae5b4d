#pragma once

// Scenario configuration: one `dot.path = value` assignment per line, `#`
// starts a comment. Unknown keys, duplicates and malformed values are errors
// that name the offending key.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qsd/cli/format.hpp"
#include "qsd/dispersion.hpp"
#include "qsd/errors.hpp"
#include "qsd/model.hpp"
#include "qsd/pde.hpp"

namespace qsd::cli {

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

using KeyValues = std::map<std::string, std::string>;

enum class Scenario { free, harmonic, pde };
enum class Units { scaled, raw };
enum class Spacing { linear, geometric };
enum class PotentialKind { harmonic, double_well, polynomial, none };

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "scenario",          "modes",          "units",
      "params.mass",       "params.friction", "params.beta",
      "params.hbar",       "params.omega0",   "arrhenius.D0",
      "arrhenius.Ea",      "initial.sigma2",  "initial.mean",
      "initial.profile",   "potential.kind",  "potential.coefficients",
      "potential.a",       "potential.b",     "grid.x_lo",
      "grid.x_hi",         "grid.n",          "grid.n_beta",
      "grid.beta_min",     "grid.check_beta_resolution",
      "pde.allow_invalid", "pde.cfl_diffusion", "pde.cfl_drift",
      "time.t_start",      "time.t_end",      "time.n_samples",
      "time.spacing",      "solver.rtol",     "solver.atol",
      "log_law.const",     "output.directory", "output.precision",
  };
  return keys;
}

inline bool is_numeric_key(std::string_view key) {
  static const std::vector<std::string_view> numeric = {
      "params.mass",    "params.friction", "params.beta",      "params.hbar",
      "params.omega0",  "arrhenius.D0",    "arrhenius.Ea",     "initial.sigma2",
      "initial.mean",   "potential.a",     "potential.b",      "grid.x_lo",
      "grid.x_hi",      "grid.n",          "grid.n_beta",      "grid.beta_min",
      "pde.cfl_diffusion", "pde.cfl_drift", "time.t_start",    "time.t_end",
      "time.n_samples", "solver.rtol",     "solver.atol",      "log_law.const",
      "output.precision",
  };
  return std::find(numeric.begin(), numeric.end(), key) != numeric.end();
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline KeyValues parse_config_text(std::string_view text) {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  const auto& keys = known_keys();
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected `key = value`");
    const auto key = trim(std::string_view(body).substr(0, eq));
    const auto value = trim(std::string_view(body).substr(eq + 1));
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError("unknown config key `" + key + "`", key);
    if (value.empty()) throw ConfigError("empty value for `" + key + "`", key);
    if (!kv.emplace(key, value).second)
      throw ConfigError("duplicate config key `" + key + "`", key);
  }
  return kv;
}

inline KeyValues read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string(), "config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

struct ScenarioConfig {
  Scenario scenario = Scenario::free;
  std::vector<std::string> modes;
  Units units = Units::scaled;
  PhysicalParams params;
  std::optional<ArrheniusModel> arrhenius;

  double initial_sigma2 = 0.0;  // config units
  double initial_mean = 0.0;    // config units
  dispersion::InitialProfile profile = dispersion::InitialProfile::uniform;

  PotentialKind potential_kind = PotentialKind::harmonic;
  std::vector<double> coefficients;  // raw units
  double well_a = 0.0;
  double well_b = 0.0;

  double x_lo = 0.0, x_hi = 0.0;  // config units
  std::size_t n = 1024;
  std::size_t n_beta = 256;
  double beta_min = 0.0;  // 0 = automatic
  bool check_beta_resolution = true;

  bool allow_invalid = false;
  double cfl_diffusion = 0.4;
  double cfl_drift = 0.4;

  double t_start = 0.0, t_end = 1.0;  // config units
  std::size_t n_samples = 101;
  Spacing spacing = Spacing::linear;

  double rtol = 1e-9;
  double atol = 1e-12;  // sigma2 config units
  std::optional<double> log_law_const;

  std::string out_dir = "out";
  int precision = 17;

  // Raw value of one config unit.
  double time_unit() const {
    return units == Units::scaled ? derived_scales(params).crossover_time : 1.0;
  }
  double length_unit() const { return units == Units::scaled ? params.thermal_length() : 1.0; }
  double sigma2_unit() const { return length_unit() * length_unit(); }

  /// Output sample times in config units.
  std::vector<double> sample_times() const {
    std::vector<double> t(n_samples);
    const double last = static_cast<double>(n_samples - 1);
    for (std::size_t i = 0; i < n_samples; ++i) {
      const double f = static_cast<double>(i) / last;
      t[i] = spacing == Spacing::linear ? t_start + (t_end - t_start) * f
                                        : t_start * std::pow(t_end / t_start, f);
    }
    t.front() = t_start;
    t.back() = t_end;
    return t;
  }

  Potential potential() const {
    switch (potential_kind) {
      case PotentialKind::harmonic: return Potential::harmonic(params.mass, params.omega0);
      case PotentialKind::double_well: return Potential::double_well(well_a, well_b);
      case PotentialKind::polynomial: return Potential::polynomial(coefficients);
      case PotentialKind::none: break;
    }
    return Potential::polynomial({});
  }

  pde::Grid grid() const {
    const double l = length_unit();
    return {x_lo * l, x_hi * l, n};
  }

  /// Every key with its resolved value; feeding this back reproduces the run.
  KeyValues resolved() const;
};

inline std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::free: return "free";
    case Scenario::harmonic: return "harmonic";
    case Scenario::pde: return "pde";
  }
  return "free";
}

inline std::string_view to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::harmonic: return "harmonic";
    case PotentialKind::double_well: return "double_well";
    case PotentialKind::polynomial: return "polynomial";
    case PotentialKind::none: return "none";
  }
  return "none";
}

inline KeyValues ScenarioConfig::resolved() const {
  KeyValues kv;
  auto num = [](double v) { return format_shortest(v); };
  auto join = [](const auto& items, auto&& fmt) {
    std::string s;
    for (const auto& it : items) {
      if (!s.empty()) s += ',';
      s += fmt(it);
    }
    return s;
  };
  kv["scenario"] = std::string(to_string(scenario));
  kv["modes"] = join(modes, [](const std::string& m) { return m; });
  kv["units"] = units == Units::scaled ? "scaled" : "raw";
  kv["params.mass"] = num(params.mass);
  kv["params.friction"] = num(params.friction);
  kv["params.beta"] = num(params.beta);
  kv["params.hbar"] = num(params.hbar);
  kv["params.omega0"] = num(params.omega0);
  if (arrhenius) {
    kv["arrhenius.D0"] = num(arrhenius->prefactor);
    kv["arrhenius.Ea"] = num(arrhenius->activation_energy);
  }
  kv["initial.sigma2"] = num(initial_sigma2);
  kv["initial.mean"] = num(initial_mean);
  kv["initial.profile"] =
      profile == dispersion::InitialProfile::uniform ? "uniform" : "coth";
  kv["potential.kind"] = std::string(to_string(potential_kind));
  if (!coefficients.empty()) kv["potential.coefficients"] = join(coefficients, num);
  kv["potential.a"] = num(well_a);
  kv["potential.b"] = num(well_b);
  kv["grid.x_lo"] = num(x_lo);
  kv["grid.x_hi"] = num(x_hi);
  kv["grid.n"] = std::to_string(n);
  kv["grid.n_beta"] = std::to_string(n_beta);
  kv["grid.beta_min"] = num(beta_min);
  kv["grid.check_beta_resolution"] = check_beta_resolution ? "true" : "false";
  kv["pde.allow_invalid"] = allow_invalid ? "true" : "false";
  kv["pde.cfl_diffusion"] = num(cfl_diffusion);
  kv["pde.cfl_drift"] = num(cfl_drift);
  kv["time.t_start"] = num(t_start);
  kv["time.t_end"] = num(t_end);
  kv["time.n_samples"] = std::to_string(n_samples);
  kv["time.spacing"] = spacing == Spacing::linear ? "linear" : "geometric";
  kv["solver.rtol"] = num(rtol);
  kv["solver.atol"] = num(atol);
  kv["log_law.const"] = log_law_const ? num(*log_law_const) : "auto";
  kv["output.directory"] = out_dir;
  kv["output.precision"] = std::to_string(precision);
  return kv;
}

namespace detail {

class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::optional<std::string> text(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    return it->second;
  }

  double number(const std::string& key, double fallback) const {
    auto s = text(key);
    if (!s) return fallback;
    auto v = parse_double(*s);
    if (!v || !std::isfinite(*v))
      throw ConfigError(key + ": `" + *s + "` is not a finite number", key);
    return *v;
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    const double v = number(key, static_cast<double>(fallback));
    if (v < 0 || v != std::floor(v) || v > 1e9)
      throw ConfigError(key + ": expected a non-negative integer", key);
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key, bool fallback) const {
    auto s = text(key);
    if (!s) return fallback;
    if (*s == "true") return true;
    if (*s == "false") return false;
    throw ConfigError(key + ": expected true or false", key);
  }

 private:
  const KeyValues& kv_;
};

[[noreturn]] inline void fail(const std::string& key, const std::string& msg) {
  throw ConfigError(key + ": " + msg, key);
}

}  // namespace detail

inline ScenarioConfig resolve_config(const KeyValues& kv) {
  detail::Reader r(kv);
  ScenarioConfig c;
  using detail::fail;

  const auto scenario = r.text("scenario");
  if (!scenario) fail("scenario", "missing (free | harmonic | pde)");
  if (*scenario == "free") c.scenario = Scenario::free;
  else if (*scenario == "harmonic") c.scenario = Scenario::harmonic;
  else if (*scenario == "pde") c.scenario = Scenario::pde;
  else fail("scenario", "unknown scenario `" + *scenario + "`");

  if (auto kind = r.text("potential.kind")) {
    if (*kind == "harmonic") c.potential_kind = PotentialKind::harmonic;
    else if (*kind == "double_well") c.potential_kind = PotentialKind::double_well;
    else if (*kind == "polynomial") c.potential_kind = PotentialKind::polynomial;
    else if (*kind == "none") c.potential_kind = PotentialKind::none;
    else fail("potential.kind", "unknown potential `" + *kind + "`");
  }
  const bool confined = c.scenario == Scenario::harmonic ||
                        (c.scenario == Scenario::pde && c.potential_kind == PotentialKind::harmonic);

  c.params.mass = r.number("params.mass", 1.0);
  c.params.friction = r.number("params.friction", 1.0);
  c.params.beta = r.number("params.beta", 1.0);
  c.params.hbar = r.number("params.hbar", 1.0);
  c.params.omega0 = r.number("params.omega0", confined ? 1.0 : 0.0);
  try {
    c.params.validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what(), e.field());
  }
  if (c.scenario == Scenario::free && c.params.omega0 != 0.0)
    fail("params.omega0", "the free scenario needs omega0 = 0");
  if (confined && !(c.params.omega0 > 0.0))
    fail("params.omega0", "a harmonic potential needs omega0 > 0");

  if (r.has("arrhenius.D0") || r.has("arrhenius.Ea")) {
    if (!r.has("arrhenius.D0")) fail("arrhenius.D0", "required together with arrhenius.Ea");
    if (!r.has("arrhenius.Ea")) fail("arrhenius.Ea", "required together with arrhenius.D0");
    ArrheniusModel a{r.number("arrhenius.D0", 1.0), r.number("arrhenius.Ea", 1.0)};
    try {
      a.validate();
      arrhenius_diffusion(a, c.params.beta, c.params);
    } catch (const InputError& e) {
      throw ConfigError(e.what(), e.field());
    }
    c.arrhenius = a;
  }

  const auto units = r.text("units");
  if (!units) c.units = c.params.hbar > 0.0 ? Units::scaled : Units::raw;
  else if (*units == "scaled") c.units = Units::scaled;
  else if (*units == "raw") c.units = Units::raw;
  else fail("units", "expected scaled or raw");
  if (c.units == Units::scaled && c.params.hbar == 0.0)
    fail("units", "scaled units need hbar > 0");

  // Modes.
  const auto modes = r.text("modes");
  if (!modes) fail("modes", "missing");
  c.modes = split_list(*modes);
  if (c.modes.empty()) fail("modes", "no modes listed");
  for (std::size_t i = 0; i < c.modes.size(); ++i) {
    const auto& m = c.modes[i];
    if (std::find(c.modes.begin(), c.modes.begin() + static_cast<long>(i), m) !=
        c.modes.begin() + static_cast<long>(i))
      fail("modes", "duplicate mode `" + m + "`");
    if (c.scenario == Scenario::pde) {
      if (!pde::parse_form(m)) fail("modes", "`" + m + "` is not a pde form (coffey | ankerhold)");
      continue;
    }
    const auto dm = dispersion::parse_mode(m);
    if (!dm) fail("modes", "unknown dispersion mode `" + m + "`");
    if (c.scenario == Scenario::harmonic && dispersion::requires_free(*dm))
      fail("modes", "`" + m + "` requires scenario = free");
    if (c.scenario == Scenario::free && dispersion::requires_harmonic(*dm))
      fail("modes", "`" + m + "` requires scenario = harmonic");
    if (c.params.hbar == 0.0 &&
        (*dm == dispersion::Mode::closed_form || *dm == dispersion::Mode::early_power))
      fail("params.hbar", "`" + m + "` needs hbar > 0");
  }
  auto has_mode = [&](std::string_view m) {
    return std::find(c.modes.begin(), c.modes.end(), m) != c.modes.end();
  };

  // Initial state.
  c.initial_sigma2 = r.number("initial.sigma2", c.scenario == Scenario::free ? 0.0 : 1.0);
  c.initial_mean = r.number("initial.mean", 0.0);
  if (c.initial_sigma2 < 0.0) fail("initial.sigma2", "must be >= 0");
  if (auto prof = r.text("initial.profile")) {
    if (*prof == "uniform") c.profile = dispersion::InitialProfile::uniform;
    else if (*prof == "coth") c.profile = dispersion::InitialProfile::coth_equilibrium;
    else fail("initial.profile", "expected uniform or coth");
  }
  if (c.profile == dispersion::InitialProfile::coth_equilibrium &&
      (c.scenario != Scenario::harmonic || c.params.hbar == 0.0))
    fail("initial.profile", "the coth profile needs scenario = harmonic and hbar > 0");
  if (has_mode("beta_resolved") && c.profile == dispersion::InitialProfile::uniform &&
      !(c.initial_sigma2 > 0.0))
    fail("initial.sigma2", "beta_resolved needs a positive initial dispersion");
  if (c.scenario == Scenario::pde && !(c.initial_sigma2 > 0.0))
    fail("initial.sigma2", "the pde scenario needs a positive initial variance");

  // Potential.
  if (auto coeffs = r.text("potential.coefficients")) {
    for (const auto& item : split_list(*coeffs)) {
      auto v = parse_double(item);
      if (!v || !std::isfinite(*v)) fail("potential.coefficients", "`" + item + "` is not a number");
      c.coefficients.push_back(*v);
    }
    if (c.coefficients.size() > Potential::kMaxDegree + 1)
      fail("potential.coefficients", "degree exceeds 8");
  }
  c.well_a = r.number("potential.a", 0.0);
  c.well_b = r.number("potential.b", 0.0);
  if (c.scenario == Scenario::pde && c.potential_kind == PotentialKind::polynomial &&
      c.coefficients.empty())
    fail("potential.coefficients", "required for a polynomial potential");

  // Time grid.
  c.spacing = c.scenario == Scenario::free ? Spacing::geometric : Spacing::linear;
  if (auto sp = r.text("time.spacing")) {
    if (*sp == "linear") c.spacing = Spacing::linear;
    else if (*sp == "geometric") c.spacing = Spacing::geometric;
    else fail("time.spacing", "expected linear or geometric");
  }
  const double default_end = c.scenario == Scenario::free ? 100.0
                             : c.scenario == Scenario::harmonic ? 40.0
                                                                : 8.0;
  c.t_start = r.number("time.t_start", c.spacing == Spacing::geometric ? 1e-4 : 0.0);
  c.t_end = r.number("time.t_end", default_end);
  c.n_samples = r.count("time.n_samples", c.scenario == Scenario::pde ? 41 : 101);
  if (c.n_samples < 2) fail("time.n_samples", "must be at least 2");
  if (c.t_start < 0.0) fail("time.t_start", "must be >= 0");
  if (!(c.t_end > c.t_start)) fail("time.t_end", "must exceed time.t_start");
  if (c.spacing == Spacing::geometric && !(c.t_start > 0.0))
    fail("time.t_start", "geometric spacing needs t_start > 0");
  if (has_mode("log_law") && !(c.t_start > 0.0))
    fail("time.t_start", "log_law needs t_start > 0");

  // Grids.
  c.n = r.count("grid.n", 1024);
  c.n_beta = r.count("grid.n_beta", 256);
  c.beta_min = r.number("grid.beta_min", 0.0);
  c.check_beta_resolution = r.flag("grid.check_beta_resolution", true);
  if (c.n_beta < 16) fail("grid.n_beta", "must be at least 16");
  if (c.beta_min < 0.0 || c.beta_min > c.params.beta / static_cast<double>(c.n_beta))
    fail("grid.beta_min", "must lie in (0, beta/n_beta], or 0 for automatic");
  if (c.scenario == Scenario::pde) {
    if (c.n < 64) fail("grid.n", "must be at least 64");
    if (r.has("grid.x_lo") != r.has("grid.x_hi"))
      fail(r.has("grid.x_lo") ? "grid.x_hi" : "grid.x_lo", "set both grid bounds or neither");
  }
  if (r.has("grid.x_lo")) {
    c.x_lo = r.number("grid.x_lo", 0.0);
    c.x_hi = r.number("grid.x_hi", 0.0);
  } else if (c.scenario == Scenario::pde) {
    if (c.potential_kind != PotentialKind::harmonic && c.potential_kind != PotentialKind::none)
      fail("grid.x_lo", "required for this potential");
    // Ten standard deviations of the widest Gaussian the run can reach.
    const double l2 = c.sigma2_unit();
    double spread = c.initial_sigma2 * l2;
    if (c.potential_kind == PotentialKind::harmonic)
      spread = std::max(spread, 1.1 / (c.params.beta * c.params.stiffness()));
    else
      spread += 2.0 * c.params.diffusion() * c.t_end * c.time_unit();
    const double half = 10.0 * std::sqrt(spread) / c.length_unit();
    c.x_lo = c.initial_mean - half;
    c.x_hi = c.initial_mean + half;
  }
  if (c.scenario == Scenario::pde && !(c.x_hi > c.x_lo)) fail("grid.x_hi", "must exceed grid.x_lo");

  c.allow_invalid = r.flag("pde.allow_invalid", false);
  c.cfl_diffusion = r.number("pde.cfl_diffusion", 0.4);
  c.cfl_drift = r.number("pde.cfl_drift", 0.4);
  if (!(c.cfl_diffusion > 0.0 && c.cfl_diffusion <= 0.5)) fail("pde.cfl_diffusion", "must lie in (0, 0.5]");
  if (!(c.cfl_drift > 0.0 && c.cfl_drift <= 1.0)) fail("pde.cfl_drift", "must lie in (0, 1]");

  c.rtol = r.number("solver.rtol", 1e-9);
  c.atol = r.number("solver.atol", 1e-12);
  if (!(c.rtol > 0.0)) fail("solver.rtol", "must be positive");
  if (!(c.atol > 0.0)) fail("solver.atol", "must be positive");

  if (auto lc = r.text("log_law.const"); lc && *lc != "auto")
    c.log_law_const = r.number("log_law.const", 0.0);

  if (auto dir = r.text("output.directory")) c.out_dir = *dir;
  const auto precision = r.count("output.precision", 17);
  if (precision < 1 || precision > 17) fail("output.precision", "must lie in [1, 17]");
  c.precision = static_cast<int>(precision);
  return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  return resolve_config(read_config_file(path));
}

}  // namespace qsd::cli
