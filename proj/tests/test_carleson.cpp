#include <gtest/gtest.h>

#include "wib/carleson.hpp"
#include "wib/random.hpp"

using namespace wib;

namespace {

Params uniform_params() {
  Params prm;
  prm.n = 2;
  prm.p = 2;
  prm.alpha = 0.5;
  return prm;
}

}  // namespace

TEST(Carleson, UniformClosedForm) {
  const CarlesonEngine eng(uniform_params());
  for (int level : {-2, 0, 3}) {
    const Cube q = make_cube(2, Shift{1, 0}, level, {1, -2});
    for (int d = 0; d <= 8; ++d) {
      const double want = (2.0 - std::ldexp(1.0, -d)) * q.side();
      const auto r = eng.evaluate(q, d);
      EXPECT_NEAR(r.xi / want, 1.0, 1e-9) << "level=" << level << " depth=" << d;
      EXPECT_NEAR(r.xi_max / want, 1.0, 1e-9);
    }
  }
}

TEST(Carleson, DepthZeroIsSingleTerm) {
  Params prm = uniform_params();
  prm.theta = 0.5;
  prm.a = -0.25;
  const CarlesonEngine eng(prm);
  const Cube q = make_cube(2, Shift{}, 1, {1, 0});
  EXPECT_NEAR(eng.evaluate(q, 0).S / eng.a_term(q), 1.0, 1e-12);
}

TEST(Carleson, BottomUpMatchesNaiveSum) {
  for (double theta : {0.0, 0.5}) {
    Params prm = uniform_params();
    prm.theta = theta;
    prm.a = -0.25;
    const CarlesonEngine eng(prm);
    for (const Cube& root : {make_cube(2, Shift{}, 0, {2, 1}), make_cube(2, Shift{1, 1}, 0, {0, 0})}) {
      const int depth = 4;
      CarlesonOptions opt;
      opt.check_stability = false;
      const CarlesonReport rep = carleson_profile(eng, root, depth, opt);
      const CubeTree tree(root, depth);
      std::vector<Cube> all;
      for (int j = 0; j <= depth; ++j) {
        for (std::size_t f = 0; f < tree.count(j); ++f) all.push_back(tree.cube(j, f));
      }
      ASSERT_EQ(rep.perCube.size(), all.size());
      double best = 0.0;
      for (const auto& [q, xi] : rep.perCube) {
        double s = 0.0;
        for (const Cube& c : all) {
          if (contains(q, c)) s += eng.a_term(c);
        }
        const double naive = s / eng.muw(q);
        EXPECT_NEAR(xi / naive, 1.0, 1e-10);
        best = std::max(best, naive);
      }
      EXPECT_NEAR(rep.supValue / best, 1.0, 1e-10);
      EXPECT_NEAR(eng.evaluate(root, depth).xi_max / best, 1.0, 1e-10);
    }
  }
}

TEST(Carleson, MonotoneInDepth) {
  Rng rng(51);
  Params prm = uniform_params();
  prm.theta = 0.5;
  for (int trial = 0; trial < 20; ++trial) {
    prm.a = uniform(rng, -0.6, 0.5);
    const CarlesonEngine eng(prm);
    const Cube q = make_cube(2, Shift{static_cast<int>(uniform_int(rng, 0, 2)), 0},
                             static_cast<int>(uniform_int(rng, -2, 4)),
                             {uniform_int(rng, -3, 3), uniform_int(rng, -3, 3)});
    double prev = 0.0;
    for (int d = 0; d <= 6; ++d) {
      const auto r = eng.evaluate(q, d);
      EXPECT_GE(r.S, prev);
      prev = r.S;
    }
  }
}

TEST(Carleson, TranslationCovariantForLebesgue) {
  const CarlesonEngine eng(uniform_params());
  Rng rng(52);
  const double ref = eng.evaluate(make_cube(2, Shift{}, 2, {0, 0}), 5).xi_max;
  for (int trial = 0; trial < 10; ++trial) {
    const Cube q = make_cube(2, Shift{1, 2}, 2, {uniform_int(rng, -50, 50), uniform_int(rng, -50, 50)});
    EXPECT_NEAR(eng.evaluate(q, 5).xi_max / ref, 1.0, 1e-9);
  }
}

TEST(Carleson, SupDominatesSingleCubeRatio) {
  Params prm = uniform_params();
  prm.theta = 0.5;
  prm.a = 0.3;
  const CarlesonEngine eng(prm);
  const Cube root = make_cube(2, Shift{}, 0, {1, 1});
  const CubeTree tree(root, 3);
  const double sup = eng.evaluate(root, 3).xi_max;
  for (int j = 0; j <= 3; ++j) {
    for (std::size_t f = 0; f < tree.count(j); ++f) {
      const Cube q = tree.cube(j, f);
      EXPECT_GE(sup * (1 + 1e-12), eng.a_term(q) / eng.muw(q));
    }
  }
}

TEST(C1, UniformClosedFormAndSlope) {
  const CarlesonEngine eng(uniform_params());
  Box region{2, {}, {}};
  region.hi[0] = region.hi[1] = 1.0;
  const int depth = 6;
  std::vector<double> lams, vals;
  for (double lam : {1.0, 2.0, 4.0, 8.0}) {
    const C1Result r = c1_of_lambda(eng, lam, region, depth, 1, false);
    EXPECT_NEAR(r.value / ((2.0 - std::ldexp(1.0, -depth)) * r.top_side), 1.0, 1e-9);
    lams.push_back(lam);
    vals.push_back(r.value);
  }
  EXPECT_NEAR(fit_loglog(lams, vals).slope, -1.0, 1e-9);
}

TEST(C1, EmptyRegion) {
  const CarlesonEngine eng(uniform_params());
  Box region{2, {}, {}};
  region.hi[0] = 1.0;
  EXPECT_TRUE(c1_of_lambda(eng, 1.0, region, 4).empty);
}

TEST(C1, VanishesForAdmissibleDensity) {
  Params prm = uniform_params();
  prm.a = -0.25;
  const CarlesonEngine eng(prm);
  Box region{2, {}, {}};
  for (int i = 0; i < 2; ++i) {
    region.lo[i] = -0.1;
    region.hi[i] = 0.1;
  }
  double prev = HUGE_VAL;
  for (double lam : {1.0, 4.0, 16.0, 64.0}) {
    const double v = c1_of_lambda(eng, lam, region, 4, 1, false).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Threshold, RejectsInadmissibleRows) {
  ThresholdConfig cfg;
  cfg.base = uniform_params();
  cfg.a_list = {-1.2, 0.0};
  cfg.delta_list = {1.0, 0.5};
  cfg.depth = 3;
  cfg.chain = 4;
  cfg.far_rings = {2, 3};
  const ThresholdTable t = threshold_scan(cfg);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_FALSE(t.rows[0].admissible);
  EXPECT_FALSE(t.rows[0].reason.empty());
  EXPECT_TRUE(t.rows[2].admissible);
  EXPECT_GT(t.rows[2].sup_xi, t.rows[3].sup_xi);
  EXPECT_EQ(dyadic_level_at_most(0.3), 2);
  EXPECT_EQ(dyadic_level_at_most(1.0), 0);
}
