#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "qsd/specfun.hpp"

namespace {

using namespace qsd::specfun;

double residual(double w, double x) { return std::abs(w * std::exp(w) - x) / std::abs(x); }

TEST(Specfun, BranchPointConstant) { EXPECT_EQ(kBranchPoint, -std::exp(-1.0)); }

TEST(LambertW0, ReferenceValues) {
  EXPECT_EQ(lambert_w0(0.0), 0.0);
  EXPECT_EQ(lambert_w0(kBranchPoint), -1.0);
  // Frozen from a bisection on w e^w = 1 over [0, 1].
  EXPECT_NEAR(lambert_w0(1.0), 0.56714329040978387, 1e-15);
  EXPECT_NEAR(lambert_w0(1.0), qsd_test::w0_bisect(1.0), 1e-14);
}

TEST(LambertW0, DomainErrors) {
  EXPECT_THROW(lambert_w0(-0.5), std::domain_error);
  EXPECT_THROW(lambert_w0(kBranchPoint - 1e-12), std::domain_error);
  EXPECT_THROW(lambert_w0(std::nan("")), std::domain_error);
  EXPECT_EQ(lambert_w0(kBranchPoint - 5e-16), -1.0);
}

TEST(LambertWm1, ReferenceValues) {
  EXPECT_EQ(lambert_wm1(kBranchPoint), -1.0);
  EXPECT_NEAR(lambert_wm1(-0.1), -3.5771520639572971, 1e-14);
  EXPECT_NEAR(lambert_wm1(-0.1), qsd_test::wm1_bisect(-0.1), 1e-13);
  EXPECT_NEAR(lambert_wm1(-std::exp(-2.0)), -3.1461932206205826, 1e-14);
  EXPECT_NEAR(lambert_wm1(-std::exp(-2.0)), qsd_test::wm1_bisect(-std::exp(-2.0)), 1e-13);
}

TEST(LambertWm1, DomainErrors) {
  EXPECT_THROW(lambert_wm1(0.0), std::domain_error);
  EXPECT_THROW(lambert_wm1(0.5), std::domain_error);
  EXPECT_THROW(lambert_wm1(-0.4), std::domain_error);
}

TEST(LambertWm1, NegExpFormMatchesDirectArgument) {
  for (double s : {1e-12, 1e-7, 1e-3, 0.5, 1.0, 7.0, 100.0, 600.0}) {
    const double direct = lambert_wm1(-std::exp(-1.0 - s));
    EXPECT_NEAR(lambert_wm1_neg_exp(s), direct, 1e-13 * std::abs(direct) + 2e-8 * (s < 1e-6))
        << "s = " << s;
  }
  EXPECT_EQ(lambert_wm1_neg_exp(0.0), -1.0);
  // Far beyond exp underflow: w + ln(-w) = -1 - s.
  const double w = lambert_wm1_neg_exp(1e6);
  EXPECT_NEAR(w + std::log(-w), -1.0 - 1e6, 1e-9);
  EXPECT_THROW(lambert_wm1_neg_exp(-1.0), std::domain_error);
}

TEST(LambertWm1, BranchSeriesAgreesWithHalleyAtSwitch) {
  // Just inside and outside the series window around the branch point.
  for (double d : {0.9e-6, 1.1e-6}) {
    const double x = kBranchPoint + d;
    EXPECT_LT(residual(lambert_wm1(x), x), 1e-12);
    EXPECT_LT(residual(lambert_w0(x), x), 1e-12);
  }
  EXPECT_NEAR(lambert_wm1(kBranchPoint + 0.9e-6), lambert_wm1(kBranchPoint + 1.1e-6), 1e-3);
}

// Round trip on 1e4 log-uniform samples per branch, covering both the bulk
// and the neighbourhood of the branch point.
TEST(LambertProperty, RoundTripResidual) {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_w0 = 0.0, worst_wm1 = 0.0;
  for (int i = 0; i < 10000; ++i) {
    // W0 on positive arguments, log-uniform in [1e-300, 1e300].
    const double xp = std::pow(10.0, -300.0 + 600.0 * u(rng));
    worst_w0 = std::max(worst_w0, residual(lambert_w0(xp), xp));
    // Negative arguments, log-uniform in |x| in [1e-300, 1/e), shared by both branches.
    const double xn = -std::exp(std::log(1e-300) + (std::log(-kBranchPoint) - std::log(1e-300)) * u(rng));
    if (xn > kBranchPoint) {
      worst_w0 = std::max(worst_w0, residual(lambert_w0(xn), xn));
      worst_wm1 = std::max(worst_wm1, residual(lambert_wm1(xn), xn));
    }
    // Offset from the branch point log-uniform in [1e-16, 1e-1].
    const double xb = kBranchPoint + std::pow(10.0, -16.0 + 15.0 * u(rng));
    worst_w0 = std::max(worst_w0, residual(lambert_w0(xb), xb));
    worst_wm1 = std::max(worst_wm1, residual(lambert_wm1(xb), xb));
  }
  EXPECT_LE(worst_w0, 1e-12);
  EXPECT_LE(worst_wm1, 1e-12);
}

TEST(LambertProperty, BranchOrderingAndMonotonicity) {
  std::vector<double> xs;
  for (int i = 1; i < 2000; ++i) xs.push_back(kBranchPoint * (1.0 - i / 2000.0));
  double prev_m1 = -1.0, prev_0 = -1.0;
  for (double x : xs) {
    const double a = lambert_wm1(x), b = lambert_w0(x);
    EXPECT_LT(a, -1.0);
    EXPECT_GT(b, -1.0);
    EXPECT_LT(a, prev_m1) << x;  // decreasing as x increases toward 0
    EXPECT_GT(b, prev_0) << x;
    prev_m1 = a;
    prev_0 = b;
  }
}

TEST(CothStable, Values) {
  EXPECT_NEAR(coth_stable(1.0), (std::exp(2.0) + 1.0) / (std::exp(2.0) - 1.0), 1e-15);
  EXPECT_NEAR(coth_stable(1.0), 1.3130352854993313, 1e-15);
  EXPECT_NEAR(coth_stable(50.0), 1.0, 1e-15);
  EXPECT_EQ(coth_stable(1e4), 1.0);
  const double u = 1e-4;
  EXPECT_LT(std::abs(coth_stable(u) - (1.0 / u + u / 3.0)) / coth_stable(u), 1e-10);
  EXPECT_THROW(coth_stable(0.0), std::domain_error);
  EXPECT_THROW(coth_stable(-1.0), std::domain_error);
}

TEST(CothStable, SeriesMatchesDirectAtSwitch) {
  const double u = 1e-2;
  const double direct = std::cosh(u) / std::sinh(u);
  EXPECT_NEAR(coth_stable(u * (1 - 1e-12)), direct, 1e-12 * direct);
}

TEST(CothStable, ShapeProperties) {
  double prev = -1.0;
  for (int i = 1; i <= 1000; ++i) {
    const double u = i * 1e-3;
    const double c = coth_stable(u);
    EXPECT_GT(c, 1.0);
    const double excess = c - 1.0 / u;
    EXPECT_GT(excess, prev) << u;
    prev = excess;
  }
}

}  // namespace
