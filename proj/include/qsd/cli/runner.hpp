#pragma once

// Scenario runner behind the `qsd` command line tool.
//
// Exit codes: 0 success, 2 configuration error, 3 solver error.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsd/analysis.hpp"
#include "qsd/cli/config.hpp"
#include "qsd/cli/format.hpp"
#include "qsd/dispersion.hpp"
#include "qsd/errors.hpp"
#include "qsd/model.hpp"
#include "qsd/pde.hpp"

namespace qsd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;

struct ModeOutput {
  std::string mode;
  std::vector<double> times;   // config units
  std::vector<double> sigma2;  // config units
};

struct RunResult {
  std::vector<ModeOutput> outputs;
  std::vector<std::pair<std::string, std::string>> meta;  // results and flags
  std::vector<std::string> warnings;
};

/// Local exponents aligned with the samples; endpoints and samples whose
/// neighbours are not strictly positive stay empty.
inline std::vector<std::optional<double>> exponent_column(const std::vector<double>& t,
                                                          const std::vector<double>& s2) {
  std::vector<std::optional<double>> alpha(t.size());
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    if (t[i - 1] > 0.0 && s2[i - 1] > 0.0 && s2[i + 1] > 0.0 && s2[i] > 0.0) {
      const double window_t[] = {t[i - 1], t[i], t[i + 1]};
      const double window_s[] = {s2[i - 1], s2[i], s2[i + 1]};
      alpha[i] = analysis::local_exponent(window_t, window_s).alpha[0];
    }
  }
  return alpha;
}

namespace detail {

inline void run_dispersion(const ScenarioConfig& c, RunResult& out) {
  const PhysicalParams& p = c.params;
  const double tu = c.time_unit();
  const double su = c.sigma2_unit();
  const auto samples = c.sample_times();
  std::vector<double> t_raw;
  for (double t : samples) t_raw.push_back(t * tu);
  // Integrated modes start from the initial dispersion at t = 0.
  std::vector<double> t_from_zero = t_raw;
  const bool prepend = t_raw.front() > 0.0;
  if (prepend) t_from_zero.insert(t_from_zero.begin(), 0.0);

  dispersion::ModeOptions opt;
  opt.tolerances.rtol = c.rtol;
  opt.tolerances.atol = c.atol * su;
  opt.beta.grid = {c.beta_min, c.n_beta};
  opt.beta.profile = c.profile;
  opt.beta.tolerances = opt.tolerances;
  opt.beta.check_resolution = c.check_beta_resolution;
  opt.beta.keep_history = false;
  opt.arrhenius = c.arrhenius;
  if (c.log_law_const) opt.log_law_constant = *c.log_law_const * su;

  for (const auto& name : c.modes) {
    const auto mode = *dispersion::parse_mode(name);
    const bool integrated = mode == dispersion::Mode::beta_resolved ||
                            mode == dispersion::Mode::constant_sigma ||
                            mode == dispersion::Mode::relaxed;
    auto res = dispersion::solve_mode(mode, c.initial_sigma2 * su, p,
                                      integrated ? t_from_zero : t_raw, opt);
    ModeOutput mo{name, samples, {}};
    auto& s2 = res.trajectory.sigma2;
    const std::size_t skip = integrated && prepend ? 1 : 0;
    for (std::size_t i = skip; i < s2.size(); ++i) mo.sigma2.push_back(s2[i] / su);
    out.outputs.push_back(std::move(mo));
    for (auto& w : res.warnings) out.warnings.push_back(name + ": " + w);
    if (mode == dispersion::Mode::log_law)
      out.meta.emplace_back("log_law.const_used", format_scientific(res.log_law_constant / su));
  }

  if (c.scenario == Scenario::harmonic) {
    out.meta.emplace_back("sigma2_eq_relaxed",
                          format_scientific(dispersion::relaxed_fixed_point(p) / su));
    out.meta.emplace_back("sigma2_eq_coth",
                          format_scientific(dispersion::equilibrium_dispersion_harmonic(p) / su));
    out.meta.emplace_back("sigma2_eq_constant_sigma",
                          format_scientific(dispersion::constant_sigma_fixed_point(p) / su));
  }
}

inline void run_pde(const ScenarioConfig& c, RunResult& out) {
  const PhysicalParams& p = c.params;
  const double tu = c.time_unit();
  const double su = c.sigma2_unit();
  const double lu = c.length_unit();
  const auto samples = c.sample_times();
  const auto grid = c.grid();
  const auto potential = c.potential();
  pde::DtPolicy policy;
  policy.cfl_diffusion = c.cfl_diffusion;
  policy.cfl_drift = c.cfl_drift;
  policy.allow_invalid = c.allow_invalid;

  for (const auto& name : c.modes) {
    const auto form = *pde::parse_form(name);
    const auto fields = pde::build_effective_fields(potential, p, form, grid);
    for (const auto& w : fields.warnings) out.warnings.push_back(name + ": " + w);
    auto state = pde::gaussian_state(grid, c.initial_mean * lu, c.initial_sigma2 * su);
    ModeOutput mo{name, samples, {}};
    double worst_norm = 0.0, lowest = pde::min_density(state);
    std::size_t steps = 0;
    pde::EvolveStats st;
    for (double t : samples) {
      state = pde::evolve(std::move(state), fields, p, t * tu, policy, &st);
      steps += st.steps;
      lowest = std::min(lowest, st.min_density);
      const auto m = pde::moments(state);
      worst_norm = std::max(worst_norm, std::abs(m.norm - 1.0));
      mo.sigma2.push_back(m.variance / su);
    }
    const std::string prefix = "pde." + name + ".";
    out.meta.emplace_back(prefix + "semiclassical_valid", fields.valid ? "true" : "false");
    out.meta.emplace_back(prefix + "clamped", st.clamped ? "true" : "false");
    out.meta.emplace_back(prefix + "min_d_eff", format_scientific(fields.min_d_eff));
    out.meta.emplace_back(prefix + "dt", format_scientific(st.dt / tu));
    out.meta.emplace_back(prefix + "steps", std::to_string(steps));
    out.meta.emplace_back(prefix + "max_norm_error", format_scientific(worst_norm));
    out.meta.emplace_back(prefix + "min_density", format_scientific(lowest));
    if (fields.valid) {
      const auto stationary = pde::stationary_solution_oracle(fields, p);
      out.meta.emplace_back(prefix + "stationary_variance",
                            format_scientific(pde::moments(stationary).variance / su));
    }
    out.outputs.push_back(std::move(mo));
  }
  if (c.potential_kind == PotentialKind::harmonic) {
    out.meta.emplace_back("sigma2_eq_relaxed",
                          format_scientific(dispersion::relaxed_fixed_point(p) / su));
    out.meta.emplace_back("sigma2_eq_coth",
                          format_scientific(dispersion::equilibrium_dispersion_harmonic(p) / su));
  }
}

}  // namespace detail

/// Runs every requested mode; throws SolverError on numerical failure.
inline RunResult execute(const ScenarioConfig& c) {
  RunResult r;
  if (c.scenario == Scenario::pde) detail::run_pde(c, r);
  else detail::run_dispersion(c, r);
  return r;
}

inline std::vector<std::pair<std::string, std::string>> derived_lines(const ScenarioConfig& c) {
  std::vector<std::pair<std::string, std::string>> lines;
  const auto sc = derived_scales(c.params);
  const auto cs = analysis::crossover_scales(c.params, c.arrhenius);
  lines.emplace_back("derived.D", format_scientific(sc.diffusion));
  lines.emplace_back("derived.lambda_T", format_scientific(sc.thermal_length));
  lines.emplace_back("derived.t_cross", format_scientific(sc.crossover_time));
  lines.emplace_back("derived.quantum_tail_sigma2", format_scientific(cs.quantum_tail_sigma2));
  if (c.arrhenius) {
    const auto a = arrhenius_diffusion(*c.arrhenius, c.params.beta, c.params);
    lines.emplace_back("derived.lambda_E", format_scientific(a.activation_length));
    lines.emplace_back("derived.arrhenius_D", format_scientific(a.diffusion));
    lines.emplace_back("derived.d_beta_beta_zeta", format_scientific(a.d_beta_beta_friction));
  }
  return lines;
}

inline void write_outputs(const ScenarioConfig& c, const RunResult& r,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string scenario(to_string(c.scenario));
  for (const auto& mo : r.outputs) {
    std::ofstream csv(dir / (scenario + "_" + mo.mode + ".csv"), std::ios::binary);
    if (!csv) throw SolverError("cannot write " + (dir / (scenario + "_" + mo.mode + ".csv")).string());
    const auto alpha = exponent_column(mo.times, mo.sigma2);
    write_trajectory_csv(csv, mo.times, mo.sigma2, alpha, c.precision);
  }

  std::ofstream meta(dir / "meta.txt", std::ios::binary);
  if (!meta) throw SolverError("cannot write " + (dir / "meta.txt").string());
  meta << "# resolved configuration\n";
  for (const auto& [k, v] : c.resolved()) meta << k << " = " << v << '\n';
  meta << "# derived scales (raw units)\n";
  for (const auto& [k, v] : derived_lines(c)) meta << k << " = " << v << '\n';
  meta << "# scheme\n";
  if (c.units == Units::scaled) {
    meta << "scheme.units = t in units of t_cross, x in units of lambda_T, sigma2 in units of "
            "lambda_T^2\n";
  } else {
    meta << "scheme.units = raw\n";
  }
  if (c.scenario == Scenario::pde) {
    meta << "scheme.pde = vertex-centred flux form, Heun time stepping, reflecting walls\n";
  } else {
    meta << "scheme.ode = Dormand-Prince 5(4), seed at 1e-8 t_cross for zero start\n";
  }
  meta << "# results\n";
  for (const auto& [k, v] : r.meta) meta << k << " = " << v << '\n';
  for (const auto& w : r.warnings) meta << "warning = " << w << '\n';
}

inline int report(std::ostream& err, int code, const std::string& msg) {
  err << "qsd: " << msg << '\n';
  return code;
}

// "config error: <key>: <message>", with the key left out when the message
// already starts with it.
inline int report_config(std::ostream& err, const InputError& e) {
  std::string msg = e.what();
  if (!e.field().empty() && msg.rfind(e.field(), 0) != 0) msg = e.field() + ": " + msg;
  return report(err, kExitConfig, "config error: " + msg);
}

/// `qsd run`: executes one scenario and writes CSVs plus meta.txt.
inline int run_command(const std::filesystem::path& config_path,
                       const std::optional<std::filesystem::path>& out_dir, std::ostream& err) {
  ScenarioConfig c;
  try {
    auto kv = read_config_file(config_path);
    if (out_dir) kv["output.directory"] = out_dir->string();
    c = resolve_config(kv);
  } catch (const InputError& e) {
    return report_config(err, e);
  }
  try {
    const auto r = execute(c);
    write_outputs(c, r, c.out_dir);
    for (const auto& w : r.warnings) err << "qsd: warning: " << w << '\n';
  } catch (const std::exception& e) {
    return report(err, kExitSolver, std::string("solver error: ") + e.what());
  }
  return kExitOk;
}

/// `qsd scales`: prints derived scales in raw units.
inline int scales_command(const std::filesystem::path& config_path, std::ostream& out,
                          std::ostream& err) {
  try {
    const auto c = load_config(config_path);
    for (const auto& [k, v] : derived_lines(c)) out << k << " = " << v << '\n';
  } catch (const InputError& e) {
    return report_config(err, e);
  }
  return kExitOk;
}

struct SweepRow {
  std::string value;
  double final_sigma2 = 0.0;  // raw units
  double early_alpha = 0.0;
  double t_cross = 0.0;
  std::optional<double> sigma2_eq_coth;  // raw units
};

/// `qsd sweep`: one independent run per value of `key`, executed
/// concurrently, each in its own subdirectory, plus a sweep.csv summary in
/// raw units.
inline int sweep_command(const std::filesystem::path& config_path, const std::string& key,
                         const std::vector<std::string>& values,
                         const std::optional<std::filesystem::path>& out_dir, std::ostream& err) {
  std::vector<ScenarioConfig> configs;
  std::filesystem::path root;
  try {
    if (!is_numeric_key(key))
      throw ConfigError("sweep key `" + key + "` does not address a numeric field", key);
    if (values.empty()) throw ConfigError("sweep needs at least one value", key);
    auto base = read_config_file(config_path);
    if (out_dir) base["output.directory"] = out_dir->string();
    root = resolve_config(base).out_dir;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!parse_double(values[i]))
        throw ConfigError("sweep value `" + values[i] + "` is not a number", key);
      auto kv = base;
      kv[key] = values[i];
      char name[32];
      std::snprintf(name, sizeof name, "run_%03zu", i);
      kv["output.directory"] = (root / name).string();
      configs.push_back(resolve_config(kv));
    }
  } catch (const InputError& e) {
    return report_config(err, e);
  }

  std::vector<std::future<SweepRow>> jobs;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    jobs.push_back(std::async(std::launch::async, [&, i] {
      const auto& c = configs[i];
      const auto r = execute(c);
      write_outputs(c, r, c.out_dir);
      SweepRow row;
      row.value = values[i];
      const auto& first = r.outputs.front();
      row.final_sigma2 = first.sigma2.back() * c.sigma2_unit();
      const std::size_t head = std::max<std::size_t>(3, first.times.size() / 4);
      row.early_alpha = analysis::fitted_exponent(
          std::span(first.times).first(std::min(head, first.times.size())),
          std::span(first.sigma2).first(std::min(head, first.sigma2.size())));
      row.t_cross = derived_scales(c.params).crossover_time;
      if (c.params.omega0 > 0.0) row.sigma2_eq_coth = dispersion::equilibrium_dispersion_harmonic(c.params);
      return row;
    }));
  }
  std::vector<SweepRow> rows;
  std::string failure;
  for (auto& j : jobs) {
    try {
      rows.push_back(j.get());
    } catch (const std::exception& e) {
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) return report(err, kExitSolver, "solver error: " + failure);

  try {
    std::filesystem::create_directories(root);
    std::ofstream csv(root / "sweep.csv", std::ios::binary);
    if (!csv) throw SolverError("cannot write " + (root / "sweep.csv").string());
    csv << "value,final_sigma2,early_alpha,t_cross,sigma2_eq_coth\n";
    for (const auto& row : rows) {
      csv << row.value << ',' << format_scientific(row.final_sigma2) << ','
          << format_scientific(row.early_alpha) << ',' << format_scientific(row.t_cross) << ',';
      if (row.sigma2_eq_coth) csv << format_scientific(*row.sigma2_eq_coth);
      csv << '\n';
    }
  } catch (const std::exception& e) {
    return report(err, kExitSolver, e.what());
  }
  return kExitOk;
}

}  // namespace qsd::cli
