#include <gtest/gtest.h>

#include "wib/localization.hpp"
#include "wib/random.hpp"

using namespace wib;

namespace {

Params loc(int n, int m, double theta) {
  Params prm;
  prm.n = n;
  prm.p = 2;
  prm.m = m;
  prm.theta = theta;
  return prm;
}

}  // namespace

TEST(TestFunctionJet, MatchesFiniteDifferences) {
  Rng rng(61);
  for (Profile pr : full_dictionary()) {
    const TestFunction u(2, pr, Point{0.1, -0.2}, 0.7);
    for (int trial = 0; trial < 20; ++trial) {
      const Point x{uniform(rng, -0.5, 0.7), uniform(rng, -0.8, 0.4)};
      const Jet j = u.jet(x);
      const double h = 1e-5;
      for (int d = 0; d < 2; ++d) {
        Point a = x, b = x;
        a[d] += h;
        b[d] -= h;
        const Jet ja = u.jet(a), jb = u.jet(b);
        EXPECT_NEAR(j.g[d], (ja.v - jb.v) / (2 * h), 1e-6 * (1 + std::abs(j.g[d])));
        for (int k = 0; k < 2; ++k) {
          EXPECT_NEAR(j.H[d][k], (ja.g[k] - jb.g[k]) / (2 * h), 1e-5 * (1 + std::abs(j.H[d][k])));
        }
      }
    }
  }
}

TEST(TestFunctionJet, SupportedInDeclaredBall) {
  Rng rng(62);
  for (Profile pr : full_dictionary()) {
    const TestFunction u(3, pr, Point{0.3, 0, -0.1}, 0.5);
    const auto [c, r] = u.support();
    for (int trial = 0; trial < 500; ++trial) {
      Point x{};
      for (int i = 0; i < 3; ++i) x[i] = uniform(rng, -1, 1);
      Point d{};
      for (int i = 0; i < 3; ++i) d[i] = x[i] - c[i];
      if (norm(d, 3) >= r) {
        EXPECT_EQ(u.jet(x).v, 0.0);
      }
    }
    EXPECT_TRUE(std::isfinite(u.derivative_norm(c, 3)));
  }
}

TEST(Partition, SumsToOne) {
  const Partition part = build_partition_of_unity(1.0, 0.25, 2);
  Rng rng(63);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    Point x{};
    do {
      x[0] = uniform(rng, -2, 2);
      x[1] = uniform(rng, -2, 2);
    } while (norm(x, 2) >= 2.0);
    worst = std::max(worst, std::abs(part.sum_tau(x) - 1.0));
  }
  EXPECT_LE(worst, 1e-10);
  EXPECT_GT(part.phi_min, 0.0);
}

TEST(Partition, ScaleInvariantBounds) {
  std::vector<double> deltas, grads, hess;
  int overlap = -1;
  for (double d : {1.0, 0.5, 0.25, 0.125}) {
    const Partition part = build_partition_of_unity(1.0, d, 2);
    if (overlap < 0) overlap = part.max_overlap;
    EXPECT_EQ(part.max_overlap, overlap);
    deltas.push_back(d);
    grads.push_back(part.grad_sup);
    hess.push_back(part.hess_sup);
  }
  EXPECT_NEAR(fit_loglog(deltas, grads).slope, -1.0, 0.05);
  EXPECT_NEAR(fit_loglog(deltas, hess).slope, -2.0, 0.05);
}

TEST(Poincare, ConstantAcrossScales) {
  const Params prm = loc(2, 1, 0.0);
  double lo = HUGE_VAL, hi = 0;
  for (int j = 0; j <= 6; ++j) {
    const double d = std::ldexp(1.0, -j);
    const double r = poincare_ratio(TestFunction(2, Profile::kRadial, Point{}, d), Point{}, d, prm);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  EXPECT_LT(hi / lo - 1.0, 0.05);
}

TEST(Poincare, BoundedForDecayingWeight) {
  const Params prm = loc(2, 1, -0.5);
  double hi = 0;
  for (int j = 0; j <= 6; j += 2) {
    const double d = std::ldexp(1.0, -j);
    for (const Point& c : {Point{}, Point{0.3, 0}, Point{0, -0.7}, Point{1.5, 1.5}, Point{-0.05, 0.02}}) {
      for (Profile pr : full_dictionary()) {
        hi = std::max(hi, poincare_ratio(TestFunction(2, pr, c, d), c, d, prm));
      }
    }
  }
  EXPECT_LT(hi, 1.0);
}

TEST(Poincare, NormRatioScalesLikeDeltaToTheM) {
  for (int m : {1, 2}) {
    std::vector<double> ds, q;
    for (int j = 0; j <= 3; ++j) {
      const double d = std::ldexp(1.0, -j);
      const TestFunction u(3, Profile::kRadial, Point{}, d);
      ds.push_back(d);
      q.push_back(weighted_norm(u, 0, 2, 0) / weighted_norm(u, m, 2, 0));
    }
    EXPECT_NEAR(fit_loglog(ds, q).slope, m, 0.1 * m);
  }
}

TEST(GagliardoNirenberg, EndpointsAreOne) {
  const Params prm = loc(3, 2, 0.0);
  const TestFunction u(3, Profile::kRadial, Point{}, 0.5);
  EXPECT_EQ(gagliardo_nirenberg_ratio(u, 0, 2, prm), 1.0);
  EXPECT_EQ(gagliardo_nirenberg_ratio(u, 2, 2, prm), 1.0);
}

TEST(GagliardoNirenberg, BoundedOverDictionary) {
  for (double theta : {0.0, -0.5}) {
    const Params prm = loc(3, 2, theta);
    double hi = 0.0;
    for (double d : {1.0, 0.125, 1.0 / 32}) {
      for (Profile pr : {Profile::kRadial, Profile::kLinear}) {
        hi = std::max(hi, gagliardo_nirenberg_ratio(TestFunction(3, pr, Point{}, d), 1, 2, prm));
      }
    }
    EXPECT_LT(hi, 2.0) << "theta=" << theta;
    EXPECT_GT(hi, 0.0);
  }
}

TEST(Trudinger, UnweightedPotentialHoldsForAllBeta) {
  Params prm = loc(2, 1, 0.0);
  prm.a = 0.0;
  const TrudingerResult r = trudinger_probe(prm, {0.25, 0.5, 1.0}, powers(0.5, 0, 5));
  EXPECT_TRUE(r.found);
  EXPECT_EQ(r.minimal_beta, 0.25);
}

TEST(Trudinger, MinimalBetaForSingularPotential) {
  Params prm = loc(2, 1, 0.0);
  prm.a = -0.5;
  std::vector<double> grid;
  for (int i = 1; i <= 40; ++i) grid.push_back(0.05 * i);
  const TrudingerResult r = trudinger_probe(prm, grid, powers(0.5, 0, 6));
  ASSERT_TRUE(r.found);
  EXPECT_NEAR(r.minimal_beta, 1.0, 0.15);
  EXPECT_NEAR(r.ratio_fit.slope, prm.p * prm.m / (r.minimal_beta + 1.0), 0.1);
}

TEST(LocalBoundedness, ZeroPotential) {
  const BoundednessTable t = local_boundedness_probe(loc(2, 1, 0.0), std::nullopt, {1.0, 0.5}, {Point{}});
  for (double v : t.sup_over_centers) EXPECT_EQ(v, 0.0);
}

TEST(LocalBoundedness, DecaysForMildSingularity) {
  const BoundednessTable t =
      local_boundedness_probe(loc(2, 1, 0.0), -0.25, powers(0.5, 0, 6), {Point{}, Point{0.5, 0}});
  EXPECT_LT(t.sup_over_centers.back(), 0.1 * t.sup_over_centers.front());
}

TEST(LocalBoundedness, GrowsAlongCentres) {
  const Params prm = loc(2, 1, 0.0);
  std::vector<double> rs, vs;
  for (int j = 3; j <= 7; ++j) {
    const double r = std::ldexp(1.0, j);
    rs.push_back(r);
    vs.push_back(dictionary_sup(prm, 0.5, Point{r, 0}, 1.0, full_dictionary()));
  }
  EXPECT_NEAR(fit_loglog(rs, vs).slope, 0.5, 0.1);
}

TEST(LocalBoundedness, DictionarySupMonotone) {
  const Params prm = loc(2, 1, -0.5);
  const double small = dictionary_sup(prm, -0.25, Point{0.2, 0}, 0.5, {Profile::kRadial});
  const double big = dictionary_sup(prm, -0.25, Point{0.2, 0}, 0.5, full_dictionary());
  EXPECT_GE(big, small);
}
