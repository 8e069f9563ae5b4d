#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qsd/cli/runner.hpp"

namespace {

namespace fs = std::filesystem;
using namespace qsd::cli;

const fs::path kSource = QSD_SOURCE_DIR;
const std::string kCli = QSD_CLI_PATH;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("qsd_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

  // Runs the binary with `args`, capturing stderr into `err`.
  int run(const std::string& args, std::string* err = nullptr) {
    const auto log = dir_ / "stderr.txt";
    const std::string cmd = "\"" + kCli + "\" " + args + " 2> \"" + log.string() + "\" > \"" +
                            (dir_ / "stdout.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    if (err) *err = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
};

std::string error_field(const std::string& text) {
  try {
    resolve_config(parse_config_text(text));
  } catch (const ConfigError& e) {
    return e.field();
  }
  return {};
}

TEST(Config, ParsesCommentsAndWhitespace) {
  const auto kv = parse_config_text("# header\n  scenario = free  # trailing\n\nmodes=closed_form\r\n");
  EXPECT_EQ(kv.at("scenario"), "free");
  EXPECT_EQ(kv.at("modes"), "closed_form");
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config_text("scenario free\n"), ConfigError);
  EXPECT_THROW(parse_config_text("params.colour = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("scenario =\n"), ConfigError);
  EXPECT_THROW(parse_config_text("scenario = free\nscenario = pde\n"), ConfigError);
  try {
    parse_config_text("params.colour = 1\n");
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "params.colour");
  }
}

TEST(Config, ErrorsNameTheKey) {
  EXPECT_EQ(error_field("scenario = free\nmodes = closed_form\nparams.mass = -1\n"), "params.mass");
  EXPECT_EQ(error_field("scenario = free\nmodes = closed_form\nparams.beta = x\n"), "params.beta");
  EXPECT_EQ(error_field("scenario = free\nmodes = relaxed\n"), "modes");
  EXPECT_EQ(error_field("scenario = harmonic\nmodes = closed_form\n"), "modes");
  EXPECT_EQ(error_field("scenario = free\nmodes = closed_form\nparams.omega0 = 1\n"), "params.omega0");
  EXPECT_EQ(error_field("scenario = free\nmodes = closed_form\ntime.n_samples = 1\n"), "time.n_samples");
  EXPECT_EQ(error_field("scenario = free\nmodes = closed_form\ntime.t_start = 0\n"), "time.t_start");
  EXPECT_EQ(error_field("scenario = free\nmodes = closed_form\nparams.hbar = 0\n"), "params.hbar");
  EXPECT_EQ(error_field("scenario = free\nmodes = constant_sigma\nparams.hbar = 0\nunits = scaled\n"), "units");
  EXPECT_EQ(error_field("scenario = free\nmodes = constant_sigma\nparams.hbar = 0\n"), "");
  EXPECT_EQ(error_field("scenario = free\nmodes = beta_resolved\n"), "initial.sigma2");
  EXPECT_EQ(error_field("scenario = pde\nmodes = relaxed\n"), "modes");
  EXPECT_EQ(error_field("scenario = moon\nmodes = coffey\n"), "scenario");
  EXPECT_EQ(error_field("modes = coffey\n"), "scenario");
  EXPECT_EQ(error_field("scenario = free\nmodes = closed_form\narrhenius.D0 = 1\n"), "arrhenius.Ea");
  EXPECT_EQ(error_field("scenario = free\nmodes = closed_form\n"), "");
}

TEST(Config, Defaults) {
  const auto c = resolve_config(parse_config_text("scenario = harmonic\nmodes = relaxed\n"));
  EXPECT_EQ(c.params.omega0, 1.0);
  EXPECT_EQ(c.units, Units::scaled);
  EXPECT_EQ(c.initial_sigma2, 1.0);
  EXPECT_EQ(c.n_beta, 256u);
  EXPECT_EQ(c.precision, 17);
  EXPECT_DOUBLE_EQ(c.time_unit(), 0.125);
  EXPECT_DOUBLE_EQ(c.sigma2_unit(), 0.25);
  const auto f = resolve_config(parse_config_text("scenario = free\nmodes = closed_form\n"));
  EXPECT_EQ(f.spacing, Spacing::geometric);
  const auto t = f.sample_times();
  EXPECT_EQ(t.front(), 1e-4);
  EXPECT_EQ(t.back(), 100.0);
}

TEST(Format, Scientific) {
  EXPECT_EQ(format_scientific(0.125), "1.2500000000000000e-01");
  EXPECT_EQ(format_scientific(-3.0, 3), "-3.00e+00");
  EXPECT_EQ(format_scientific(0.0), "0.0000000000000000e+00");
  EXPECT_EQ(parse_double("1e-3"), 1e-3);
  EXPECT_FALSE(parse_double("1e-3x"));
  EXPECT_FALSE(parse_double(""));
}

TEST(Format, ExponentColumnBlankAtEndpoints) {
  const std::vector<double> t{1.0, 2.0, 4.0, 8.0}, s{1.0, 2.0, 4.0, 8.0};
  const auto a = exponent_column(t, s);
  EXPECT_FALSE(a.front());
  EXPECT_FALSE(a.back());
  EXPECT_NEAR(*a[1], 0.5, 1e-15);
  std::ostringstream os;
  write_trajectory_csv(os, t, s, a, 3);
  EXPECT_EQ(os.str(),
            "t,sigma2,alpha\n1.00e+00,1.00e+00,\n2.00e+00,2.00e+00,5.00e-01\n"
            "4.00e+00,4.00e+00,5.00e-01\n8.00e+00,8.00e+00,\n");
}

TEST_F(CliTest, GoldenFreeAndHarmonic) {
  for (const std::string scenario : {"free", "harmonic"}) {
    const auto out = dir_ / scenario;
    ASSERT_EQ(run("run --config \"" + (kSource / "configs" / (scenario + ".conf")).string() +
                  "\" --out \"" + out.string() + "\""),
              0);
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(kSource / "tests" / "golden")) {
      const auto name = entry.path().filename().string();
      if (name.rfind(scenario + "_", 0) != 0) continue;
      ASSERT_TRUE(fs::exists(out / name)) << name;
      EXPECT_EQ(slurp(out / name), slurp(entry.path())) << name;
      ++compared;
    }
    EXPECT_EQ(compared, 3u) << scenario;
  }
}

TEST_F(CliTest, Deterministic) {
  const auto cfg = (kSource / "configs" / "harmonic.conf").string();
  ASSERT_EQ(run("run --config \"" + cfg + "\" --out \"" + (dir_ / "a").string() + "\""), 0);
  ASSERT_EQ(run("run --config \"" + cfg + "\" --out \"" + (dir_ / "b").string() + "\""), 0);
  for (const auto& e : fs::directory_iterator(dir_ / "a")) {
    if (e.path().extension() != ".csv") continue;
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / e.path().filename()));
  }
}

TEST_F(CliTest, CsvLayout) {
  const auto cfg = write("c.conf", "scenario = free\nmodes = closed_form\ntime.n_samples = 5\n");
  ASSERT_EQ(run("run --config \"" + cfg.string() + "\" --out \"" + (dir_ / "o").string() + "\""), 0);
  const auto csv = slurp(dir_ / "o" / "free_closed_form.csv");
  EXPECT_EQ(csv.rfind("t,sigma2,alpha\n", 0), 0u);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[1].back(), ',');
  EXPECT_EQ(lines[5].back(), ',');
  EXPECT_NE(lines[3].back(), ',');
}

TEST_F(CliTest, NegativeMassExitsWithConfigError) {
  const auto cfg = write("c.conf", "scenario = free\nmodes = closed_form\nparams.mass = -1\n");
  std::string err;
  EXPECT_EQ(run("run --config \"" + cfg.string() + "\"", &err), 2);
  EXPECT_NE(err.find("params.mass"), std::string::npos) << err;
}

TEST_F(CliTest, UnknownKeyAndMissingFile) {
  const auto cfg = write("c.conf", "scenario = free\nmodes = closed_form\nparams.spin = 1\n");
  std::string err;
  EXPECT_EQ(run("run --config \"" + cfg.string() + "\"", &err), 2);
  EXPECT_NE(err.find("params.spin"), std::string::npos);
  EXPECT_EQ(run("run --config \"" + (dir_ / "absent.conf").string() + "\""), 2);
  EXPECT_EQ(run("run"), 2);
}

TEST_F(CliTest, SolverErrorExitCode) {
  const auto cfg = write("c.conf",
                         "scenario = pde\nmodes = coffey\nunits = raw\nparams.hbar = 3\n"
                         "potential.kind = double_well\npotential.a = 0.25\npotential.b = 1\n"
                         "grid.x_lo = -4\ngrid.x_hi = 4\ngrid.n = 128\ninitial.sigma2 = 0.5\n"
                         "time.t_end = 0.1\ntime.n_samples = 2\n");
  std::string err;
  EXPECT_EQ(run("run --config \"" + cfg.string() + "\" --out \"" + (dir_ / "o").string() + "\"", &err), 3);
  EXPECT_NE(err.find("semiclassical validity violated"), std::string::npos) << err;
}

// meta.txt lists every resolved key; feeding the list back reproduces the run.
TEST_F(CliTest, MetaRoundTrip) {
  const auto first = dir_ / "first";
  ASSERT_EQ(run("run --config \"" + (kSource / "configs" / "free.conf").string() + "\" --out \"" +
                first.string() + "\""),
            0);
  std::istringstream meta(slurp(first / "meta.txt"));
  std::string line, resolved;
  bool in_config = false;
  while (std::getline(meta, line)) {
    if (line.rfind("# ", 0) == 0) {
      in_config = line == "# resolved configuration";
      continue;
    }
    if (in_config) resolved += line + "\n";
  }
  const auto kv = parse_config_text(resolved);
  for (const auto& key : {"scenario", "modes", "params.mass", "params.friction", "params.beta",
                          "params.hbar", "params.omega0", "time.t_start", "time.t_end",
                          "time.n_samples", "time.spacing", "solver.rtol", "solver.atol", "units"})
    EXPECT_TRUE(kv.count(key)) << key;
  const auto cfg = write("resolved.conf", resolved);
  const auto second = dir_ / "second";
  ASSERT_EQ(run("run --config \"" + cfg.string() + "\" --out \"" + second.string() + "\""), 0);
  for (const auto& e : fs::directory_iterator(first)) {
    if (e.path().extension() != ".csv") continue;
    EXPECT_EQ(slurp(e.path()), slurp(second / e.path().filename())) << e.path();
  }
}

TEST_F(CliTest, Scales) {
  const auto cfg = write("c.conf",
                         "scenario = free\nmodes = closed_form\nparams.friction = 2\n"
                         "params.beta = 0.5\narrhenius.D0 = 1\narrhenius.Ea = 2\n");
  ASSERT_EQ(run("scales --config \"" + cfg.string() + "\""), 0);
  const auto out = slurp(dir_ / "stdout.txt");
  EXPECT_NE(out.find("derived.D = 1.0000000000000000e+00\n"), std::string::npos) << out;
  auto value = [&](const std::string& key) {
    const auto at = out.find(key + " = ");
    EXPECT_NE(at, std::string::npos) << key;
    return std::stod(out.substr(at + key.size() + 3));
  };
  EXPECT_NEAR(value("derived.lambda_T"), 0.35355339059327376, 1e-16);
  EXPECT_NEAR(value("derived.lambda_E"), 0.35355339059327376, 1e-16);
  EXPECT_NEAR(value("derived.t_cross"), 0.0625, 1e-16);
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(CliTest, SweepHbarIncreasesFinalDispersion) {
  const auto cfg = write("c.conf", "scenario = free\nmodes = closed_form\nunits = raw\ntime.t_end = 10\n");
  ASSERT_EQ(run("sweep --config \"" + cfg.string() + "\" --key params.hbar --values 0.01,0.1,1 --out \"" +
                (dir_ / "s").string() + "\""),
            0);
  const auto rows = read_rows(dir_ / "s" / "sweep.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(slurp(dir_ / "s" / "sweep.csv").rfind("value,final_sigma2,early_alpha,t_cross,sigma2_eq_coth\n", 0), 0u);
  double prev = 0.0;
  for (const auto& r : rows) {
    const double s = std::stod(r[1]);
    EXPECT_GT(s, prev);
    prev = s;
  }
  EXPECT_TRUE(fs::exists(dir_ / "s" / "run_000" / "free_closed_form.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "s" / "run_002" / "meta.txt"));
}

TEST_F(CliTest, SweepBetaMatchesCoth) {
  const auto cfg = write("c.conf", "scenario = harmonic\nmodes = relaxed\ntime.n_samples = 5\n");
  ASSERT_EQ(run("sweep --config \"" + cfg.string() + "\" --key params.beta --values 0.5,1,2,4 --out \"" +
                (dir_ / "s").string() + "\""),
            0);
  const auto rows = read_rows(dir_ / "s" / "sweep.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    const double beta = std::stod(r[0]);
    const double u = beta * 1.0 * 1.0;
    const double expect = 1.0 / (2.0 * std::tanh(0.5 * u));  // hbar/(2 m w0) coth(u/2)
    EXPECT_NEAR(std::stod(r[4]), expect, 1e-15 * expect) << r[0];
    EXPECT_NEAR(std::stod(r[3]), 0.125 * beta * beta, 1e-15);
  }
}

TEST_F(CliTest, SweepErrors) {
  const auto cfg = write("c.conf", "scenario = free\nmodes = closed_form\n");
  const std::string base = "sweep --config \"" + cfg.string() + "\" --out \"" + (dir_ / "s").string() + "\"";
  EXPECT_EQ(run(base + " --key params.hbar --values \"\""), 2);
  EXPECT_EQ(run(base + " --key params.hbar --values"), 2);
  EXPECT_EQ(run(base + " --key scenario --values 1"), 2);
  EXPECT_EQ(run(base + " --key params.hbar --values 1,abc"), 2);
  EXPECT_EQ(run(base + " --key params.mass --values 1,-1"), 2);
}

}  // namespace
