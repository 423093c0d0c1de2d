#include <gtest/gtest.h>

#include <numbers>

#include "wib/fourier_calibration.hpp"
#include "wib/kernels.hpp"
#include "wib/random.hpp"

using namespace wib;

namespace {

Point radial_point(int n, double r) {
  Point x{};
  x[0] = r;
  (void)n;
  return x;
}

GridFunction square_grid(double half, double h, std::function<double(const Point&)> f) {
  const int cells = static_cast<int>(std::lround(2 * half / h));
  return GridFunction::sample(2, Point{-half, -half}, h, {cells, cells}, f);
}

}  // namespace

TEST(BesselKernel, ScalingIsExact) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    const double alpha = uniform(rng, 0.2, 2.5);
    Point x{};
    for (int i = 0; i < n; ++i) x[i] = uniform(rng, -2, 2);
    for (double lam : {0.5, 2.0, 4.0}) {
      Point y{};
      for (int i = 0; i < n; ++i) y[i] = lam * x[i];
      const double lhs = bessel_kernel(n, alpha, lam, x).value;
      const double rhs = std::pow(lam, n - alpha) * bessel_kernel_unit(n, alpha, y).value;
      EXPECT_EQ(lhs, rhs);
    }
  }
}

TEST(BesselKernel, Positive) {
  Rng rng(32);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    Point x{};
    for (int i = 0; i < n; ++i) x[i] = uniform(rng, -20, 20);
    EXPECT_GT(bessel_kernel_unit(n, uniform(rng, 0.2, 2.5), x).value, 0.0);
  }
}

TEST(BesselKernel, NearFieldMatchesRiesz) {
  const int n = 2;
  double lo = HUGE_VAL, hi = 0;
  for (double r : logspace(1e-4, 1e-2, 9)) {
    const Point x = radial_point(n, r);
    const double q = bessel_kernel_unit(n, 1.0, x).value / riesz_kernel(n, 1.0, x);
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  EXPECT_LT(hi / lo, 1.2);
  for (double alpha : {0.5, 1.0, 1.5}) {
    double a = HUGE_VAL, b = 0;
    for (double r : logspace(1e-4, 0.5, 12)) {
      const Point x = radial_point(n, r);
      const double q = bessel_kernel_unit(n, alpha, x).value / riesz_kernel(n, alpha, x);
      a = std::min(a, q);
      b = std::max(b, q);
    }
    EXPECT_LT(b / a, 3.0) << "alpha=" << alpha;
  }
}

TEST(BesselKernel, FarFieldExponentialDecay) {
  for (int n = 1; n <= 3; ++n) {
    double prev = HUGE_VAL;
    for (double r : logspace(2.0, 50.0, 15)) {
      const double g = std::exp(r / 2) * bessel_kernel_unit(n, 1.0, radial_point(n, r)).value;
      EXPECT_LT(g, prev) << "n=" << n << " r=" << r;
      prev = g;
    }
  }
}

TEST(BesselKernel, ErrorsAndUnderflow) {
  EXPECT_THROW(bessel_kernel_unit(2, 1.0, Point{}), std::domain_error);
  EXPECT_THROW(riesz_kernel(2, 1.0, Point{}), std::domain_error);
  EXPECT_TRUE(bessel_kernel_unit(1, 1.0, Point{800.0}).underflow);
}

TEST(BesselKernel, FourierCalibration) {
  for (double alpha : {0.5, 1.0}) {
    for (const auto& pt : fft_calibration(alpha)) {
      EXPECT_NEAR(pt.ratio, 1.0, 1e-3) << "alpha=" << alpha << " r=" << pt.radius;
    }
  }
}

TEST(TruncatedRiesz, ZeroFunction) {
  const GridFunction f = square_grid(2, 0.125, [](const Point&) { return 0.0; });
  EXPECT_EQ(truncated_riesz_apply(f, 1.0, 1.0, Point{}), 0.0);
  EXPECT_EQ(local_fractional_maximal(f, 1.0, 1.0, Point{}, dyadic_radii(1.0, 6)), 0.0);
}

TEST(TruncatedRiesz, DiscIndicatorAtCenter) {
  const GridFunction f = square_grid(1.5, 1.0 / 128, [](const Point& y) { return norm(y, 2) <= 1.0 ? 1.0 : 0.0; });
  EXPECT_NEAR(truncated_riesz_apply(f, 1.0, 1.0, Point{}) / (2 * std::numbers::pi), 1.0, 0.01);
}

TEST(TruncatedRiesz, DecreasingInLambda) {
  Rng rng(33);
  const GridFunction f = square_grid(2, 1.0 / 32, [&](const Point&) { return uniform01(rng); });
  for (int trial = 0; trial < 10; ++trial) {
    const Point x{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    double prev = HUGE_VAL;
    for (double lam : {1.0, 2.0, 4.0}) {
      const double v = truncated_riesz_apply(f, 1.0, lam, x);
      EXPECT_LE(v, prev);
      prev = v;
    }
  }
}

TEST(LocalMaximal, ConstantFunction) {
  const GridFunction f = square_grid(2, 1.0 / 16, [](const Point&) { return 1.0; });
  for (double lam : {1.0, 2.0}) {
    const double got = local_fractional_maximal(f, 1.0, lam, Point{0.01, -0.02}, dyadic_radii(lam, 8));
    EXPECT_NEAR(got / (unit_ball_volume(2) / lam), 1.0, 1e-3);
  }
}

TEST(LocalMaximal, DominatedByTruncatedRiesz) {
  Rng rng(34);
  const GridFunction f = square_grid(2, 1.0 / 32, [&](const Point&) {
    const double u = uniform01(rng);
    return u * u * u;
  });
  for (int trial = 0; trial < 100; ++trial) {
    const Point x{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const double m = local_fractional_maximal(f, 1.0, 1.0, x, dyadic_radii(1.0, 6));
    const double i = truncated_riesz_apply(f, 1.0, 1.0, x);
    EXPECT_LE(m, i * (1.0 + 1e-6));
  }
}

TEST(TruncatedRiesz, RejectsCoarseGrid) {
  const GridFunction f = square_grid(2, 0.25, [](const Point&) { return 1.0; });
  EXPECT_THROW(truncated_riesz_apply(f, 1.0, 1.0, Point{}), std::invalid_argument);
}
