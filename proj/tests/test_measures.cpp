#include <gtest/gtest.h>

#include <numbers>

#include "wib/measures.hpp"
#include "wib/random.hpp"

using namespace wib;

namespace {

// |x|^e over [0,1)^2 in polar coordinates, split along the diagonal.
double unit_square_oracle(double e) {
  const GaussRule g = make_gauss_legendre(64);
  const double half = std::numbers::pi / 8.0;
  double s = 0.0;
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const double phi = half * (g.nodes[k] + 1.0);
    s += g.weights[k] * std::pow(1.0 / std::cos(phi), e + 2.0) / (e + 2.0);
  }
  return 2.0 * half * s;
}

Box interval(double lo, double hi) {
  Box b{1, {}, {}};
  b.lo[0] = lo;
  b.hi[0] = hi;
  return b;
}

}  // namespace

TEST(WeightIntegral, UnweightedIsVolume) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    Shift t{};
    std::array<std::int64_t, kMaxDim> m{};
    for (int i = 0; i < n; ++i) m[i] = uniform_int(rng, -5, 5);
    const Cube q = make_cube(n, t, static_cast<int>(uniform_int(rng, -2, 6)), m);
    EXPECT_DOUBLE_EQ(integrate_weight(WeightSpec::power(0.0), q).value, q.volume());
  }
}

TEST(WeightIntegral, CenteredBallsMatchClosedForm) {
  for (int n = 1; n <= 3; ++n) {
    for (double theta : {-0.9, -0.5, 0.0, 0.5, 1.0}) {
      for (double r : {0.3, 1.0, 2.5}) {
        const double exact = unit_sphere_area(n) * std::pow(r, n + theta) / (n + theta);
        const double got = integrate_weight(WeightSpec::power(theta), Ball(n, Point{}, r), 1e-8).value;
        EXPECT_NEAR(got / exact, 1.0, 1e-6) << "n=" << n << " theta=" << theta << " r=" << r;
      }
    }
  }
}

TEST(WeightIntegral, UnitSquarePolarOracle) {
  for (double e : {-1.5, -0.5, 0.5, 1.0}) {
    const double got = integrate_weight(WeightSpec::power(e), make_cube(2, Shift{}, 0, {}), 1e-9).value;
    EXPECT_NEAR(got / unit_square_oracle(e), 1.0, 1e-7) << "e=" << e;
  }
}

TEST(WeightIntegral, MeasureTripleExamples) {
  Params prm;
  prm.n = 2;
  const Cube q = make_cube(2, Shift{}, 0, {});
  const MeasureTriple t0 = measure_triple(prm, q);
  EXPECT_DOUBLE_EQ(t0.wQ, 1.0);
  EXPECT_DOUBLE_EQ(t0.sigmaQ, 1.0);
  EXPECT_DOUBLE_EQ(t0.muwQ, 1.0);
  prm.theta = 0.5;
  prm.a = -0.25;
  const MeasureTriple t1 = measure_triple(prm, q, 1e-9);
  EXPECT_NEAR(t1.wQ / unit_square_oracle(0.5), 1.0, 1e-7);
  EXPECT_NEAR(t1.sigmaQ / unit_square_oracle(-0.5), 1.0, 1e-7);
  EXPECT_NEAR(t1.muwQ / unit_square_oracle(0.0), 1.0, 1e-7);
}

TEST(WeightIntegral, AdditiveOverChildren) {
  Rng rng(22);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    const double e = uniform(rng, -0.9 * n, 2.0);
    std::array<std::int64_t, kMaxDim> m{};
    Shift t{};
    for (int i = 0; i < n; ++i) {
      m[i] = uniform_int(rng, -2, 1);
      t[i] = static_cast<int>(uniform_int(rng, 0, 2));
    }
    const Cube q = make_cube(n, t, static_cast<int>(uniform_int(rng, 0, 3)), m);
    const WeightSpec w = WeightSpec::power(e);
    const double whole = integrate_weight(w, q, 1e-9).value;
    double parts = 0.0;
    for (const Cube& c : children(q)) parts += integrate_weight(w, c, 1e-9).value;
    EXPECT_NEAR(parts / whole, 1.0, 2e-8) << "n=" << n << " e=" << e;
  }
}

TEST(WeightIntegral, ReflectionSymmetry) {
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    const double e = uniform(rng, -0.9 * n, 2.0);
    Box b{n, {}, {}};
    for (int i = 0; i < n; ++i) {
      b.lo[i] = uniform(rng, -1.0, 0.5);
      b.hi[i] = b.lo[i] + uniform(rng, 0.1, 1.0);
    }
    Box r = b;
    for (int i = 0; i < n; ++i) {
      r.lo[i] = -b.hi[i];
      r.hi[i] = -b.lo[i];
    }
    const WeightSpec w = WeightSpec::power(e);
    EXPECT_NEAR(integrate_weight(w, b, 1e-9).value / integrate_weight(w, r, 1e-9).value, 1.0, 2e-8);
  }
}

TEST(WeightIntegral, RejectsNonIntegrable) {
  EXPECT_THROW(integrate_weight(WeightSpec::power(-2.0), make_cube(2, Shift{}, 0, {})), std::domain_error);
  EXPECT_THROW(integrate_weight(WeightSpec::power(1.0), make_cube(1, Shift{}, 0, {}), 0.5),
               std::invalid_argument);
}

TEST(CubeCases, FarCubesComparableToCenterValue) {
  Rng rng(24);
  const double theta = 0.5;
  int far = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    std::array<std::int64_t, kMaxDim> m{};
    for (int i = 0; i < n; ++i) m[i] = uniform_int(rng, -12, 12);
    const Cube q = make_cube(n, Shift{}, static_cast<int>(uniform_int(rng, -3, 8)), m);
    if (classify(q.box()) != CubeCase::kFar) continue;
    ++far;
    const double ratio = integrate_weight(WeightSpec::power(theta), q, 1e-8).value /
                         (std::pow(q.center_norm(), theta) * q.volume());
    EXPECT_GE(ratio, std::pow(0.5, theta));
    EXPECT_LE(ratio, std::pow(1.5, theta));
  }
  EXPECT_GT(far, 50);
}

TEST(CubeCases, NearCubesComparableToPowerOfVolume) {
  Rng rng(25);
  for (int n = 1; n <= 3; ++n) {
    for (double theta : {-0.5, 0.5}) {
      double lo = HUGE_VAL, hi = 0.0;
      for (int trial = 0; trial < 60; ++trial) {
        const int level = static_cast<int>(uniform_int(rng, -4, 10));
        std::array<std::int64_t, kMaxDim> m{};
        for (int i = 0; i < n; ++i) m[i] = uniform_int(rng, -2, 1);
        Shift t{};
        for (int i = 0; i < n; ++i) t[i] = static_cast<int>(uniform_int(rng, 0, 2));
        const Cube q = make_cube(n, t, level, m);
        if (classify(q.box()) != CubeCase::kNearOrigin) continue;
        const double r = integrate_weight(WeightSpec::power(theta), q, 1e-8).value /
                         std::pow(q.volume(), 1.0 + theta / n);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
      ASSERT_GT(hi, 0.0);
      EXPECT_LT(hi / lo, 20.0) << "n=" << n << " theta=" << theta;
    }
  }
}

TEST(Muckenhoupt, ConstantWeight) {
  const std::vector<Box> fam{interval(0, 1), interval(-3, 2), interval(5, 5.5)};
  EXPECT_NEAR(muckenhoupt_constant(WeightSpec::power(0.0), 2.0, 2.0, MuckenhouptKind::kAp, fam).value, 1.0,
              1e-12);
  EXPECT_NEAR(muckenhoupt_constant(WeightSpec::power(0.0), 2.0, 2.0, MuckenhouptKind::kAinfFW, fam).value,
              1.0, 1e-9);
}

TEST(Muckenhoupt, PowerInsideA2Stabilizes) {
  std::vector<double> rounds;
  std::vector<Box> fam;
  for (int round = 1; round <= 3; ++round) {
    for (int j = 4 * (round - 1); j < 4 * round; ++j) {
      const double h = std::ldexp(1.0, -j);
      fam.push_back(interval(-h, h));
      fam.push_back(interval(0, h));
      fam.push_back(interval(h, 2 * h));
      fam.push_back(interval(-h / 3, 2 * h / 3));
    }
    rounds.push_back(
        muckenhoupt_constant(WeightSpec::power(0.5), 2.0, 2.0, MuckenhouptKind::kAp, fam).value);
  }
  EXPECT_TRUE(std::isfinite(rounds[2]));
  EXPECT_LT(std::abs(rounds[2] / rounds[1] - 1.0), 0.05);
}

TEST(Muckenhoupt, PowerOutsideA2Diverges) {
  std::vector<double> rounds;
  std::vector<Box> fam{interval(0.5, 1.0)};
  for (int round = 1; round <= 3; ++round) {
    fam.push_back(interval(std::pow(16.0, -round), 1.0));
    rounds.push_back(
        muckenhoupt_constant(WeightSpec::power(1.5), 2.0, 2.0, MuckenhouptKind::kAp, fam).value);
  }
  EXPECT_GE(rounds[1], 2.0 * rounds[0]);
  EXPECT_GE(rounds[2], 2.0 * rounds[1]);
}

TEST(SphericalMaximal, ConstantWeightIsOne) {
  const auto r = spherical_maximal(WeightSpec::power(0.0), Point{0.3, 0.1}, 2, logspace(0.01, 10, 20));
  for (double v : r.values) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(SphericalMaximal, GrowingPowerIsUnbounded) {
  const WeightSpec w = WeightSpec::power(0.5);
  const Point x{1.0, 0.0};
  std::vector<double> tops, sups;
  for (double top : {1e2, 1e3, 1e4}) {
    tops.push_back(top);
    sups.push_back(spherical_maximal(w, x, 2, logspace(1.0, top, 40)).sup);
  }
  EXPECT_NEAR(fit_loglog(tops, sups).slope, 0.5, 0.05);
  EXPECT_TRUE(std::isinf(spherical_maximal_constant(2, 0.5)));
}

TEST(SphericalMaximal, DecayingPowerIsBounded) {
  const double theta = -0.5;
  const WeightSpec w = WeightSpec::power(theta);
  const double k = spherical_maximal_constant(2, theta);
  ASSERT_TRUE(std::isfinite(k));
  Rng rng(26);
  const std::vector<double> grid = logspace(1e-3, 1e3, 61);
  for (int trial = 0; trial < 100; ++trial) {
    const Point x{uniform(rng, -10, 10), uniform(rng, -10, 10)};
    const double ratio = spherical_maximal(w, x, 2, grid).sup / w(x, 2);
    EXPECT_LE(ratio, k * (1.0 + 1e-4));
  }
  EXPECT_LT(k, 10.0);
}
