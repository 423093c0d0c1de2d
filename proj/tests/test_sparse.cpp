#include <gtest/gtest.h>

#include <set>

#include "wib/random.hpp"
#include "wib/sparse.hpp"

using namespace wib;

namespace {

const Cube kUnit1 = make_cube(1, Shift{}, 0, {});

TreeMeasure lebesgue(const CubeTree& t) {
  std::vector<double> leaves(t.count(t.depth), std::ldexp(t.root.volume(), -t.n() * t.depth));
  return TreeMeasure::from_leaves(t, t.depth, leaves);
}

double overlap(const Box& a, const Box& b) {
  return std::max(0.0, std::min(a.hi[0], b.hi[0]) - std::max(a.lo[0], b.lo[0]));
}

// Direct stopping-time selection on Cube objects, averages from interval overlaps.
void brute_select(const Cube& q, const Box& target, int max_level, std::set<std::pair<int, std::int64_t>>& out) {
  out.insert({q.level, q.index[0]});
  const double avg = overlap(q.box(), target) / q.volume();
  if (!(avg > 0.0)) return;
  std::vector<Cube> todo = children(q);
  while (!todo.empty()) {
    const Cube c = todo.back();
    todo.pop_back();
    if (overlap(c.box(), target) / c.volume() > 2.0 * avg) {
      brute_select(c, target, max_level, out);
    } else if (c.level < max_level) {
      for (const Cube& k : children(c)) todo.push_back(k);
    }
  }
}

}  // namespace

TEST(SparseFamily, ConstantFunctionSelectsRootOnly) {
  for (int n = 1; n <= 2; ++n) {
    const CubeTree t(make_cube(n, Shift{}, 0, {}), 6);
    const SparseFamily fam = build_sparse_family(lebesgue(t));
    ASSERT_EQ(fam.size(), 1u);
    EXPECT_EQ(fam.nodes[0].witness, t.root.volume());
  }
}

TEST(SparseFamily, IndicatorMatchesBruteForce) {
  const int depth = 8;
  const CubeTree t(kUnit1, depth);
  for (std::int64_t m : {0, 5, 37, 63}) {
    const Box target = make_cube(1, Shift{}, 6, {m}).box();
    std::vector<double> leaves(t.count(depth));
    for (std::size_t f = 0; f < leaves.size(); ++f) leaves[f] = overlap(t.cube(depth, f).box(), target);
    const SparseFamily fam = build_sparse_family(TreeMeasure::from_leaves(t, depth, leaves));
    std::set<std::pair<int, std::int64_t>> got, want;
    for (const auto& node : fam.nodes) got.insert({node.cube.level, node.cube.index[0]});
    brute_select(kUnit1, target, depth, want);
    EXPECT_EQ(got, want) << "m=" << m;
  }
}

TEST(SparseFamily, WitnessSetsAreLarge) {
  Rng rng(41);
  for (double factor : {2.0, 3.0}) {
    for (int trial = 0; trial < 30; ++trial) {
      const int n = static_cast<int>(uniform_int(rng, 1, 2));
      const CubeTree t(make_cube(n, Shift{}, 0, {}), n == 1 ? 12 : 6);
      const SparseFamily fam = build_sparse_family(random_cascade(t, t.depth, rng), factor);
      for (const auto& node : fam.nodes) {
        EXPECT_GE(node.witness, (1.0 - 1.0 / factor) * node.cube.volume() * (1 - 1e-12));
      }
    }
  }
}

TEST(LocalRiesz, FourTermExample) {
  const CubeTree t(kUnit1, 3);
  std::vector<double> leaves(8, 0.0);
  leaves[0] = 0.125;
  const TreeMeasure g = TreeMeasure::from_leaves(t, 3, leaves);
  const double want = 0.125 * (1 + std::sqrt(2.0) + 2 + 2 * std::sqrt(2.0));
  EXPECT_NEAR(local_riesz_dyadic(g, 0.5, 1.0, Point{1.0 / 16}), want, 1e-14);
}

TEST(LocalRiesz, ZeroFunction) {
  const CubeTree t(kUnit1, 5);
  const TreeMeasure g = TreeMeasure::from_leaves(t, 5, std::vector<double>(32, 0.0));
  EXPECT_EQ(local_riesz_dyadic(g, 0.5, 1.0, Point{0.3}), 0.0);
  EXPECT_EQ(local_riesz_sparse(build_sparse_family(g), g, 0.5, 1.0, Point{0.3}), 0.0);
}

TEST(LocalRiesz, SingleCubeFamilyIsExact) {
  const CubeTree t(kUnit1, 0);
  const TreeMeasure g = TreeMeasure::from_leaves(t, 0, {0.7});
  const SparseFamily fam = build_sparse_family(g);
  EXPECT_DOUBLE_EQ(local_riesz_sparse(fam, g, 0.5, 1.0, Point{0.4}), 0.7);
  EXPECT_DOUBLE_EQ(local_riesz_dyadic(g, 0.5, 1.0, Point{0.4}), 0.7);
}

TEST(LocalRiesz, SparseSumBelowFullSum) {
  Rng rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 2));
    const CubeTree t(make_cube(n, Shift{}, 0, {}), n == 1 ? 10 : 5);
    const TreeMeasure g = random_cascade(t, t.depth, rng);
    const SparseFamily fam = build_sparse_family(g);
    for (int k = 0; k < 20; ++k) {
      const Point x = uniform_point(rng, t.root.box());
      const double lam = uniform(rng, 0.5, 6.0);
      EXPECT_LE(local_riesz_sparse(fam, g, 0.5, lam, x), local_riesz_dyadic(g, 0.5, lam, x) * (1 + 1e-12));
    }
  }
}

TEST(SparseBounds, PackingBoundedByTwo) {
  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const CubeTree t(kUnit1, 12);
    const TreeMeasure g = random_cascade(t, 12, rng);
    const SparseFamily fam = build_sparse_family(g);
    const TreeMeasure leb = lebesgue(t);
    const auto rep = check_sparse_lemmas(fam, leb, 1.0, 0.0, std::vector<double>(fam.size(), 1.0), leb, 2.0);
    EXPECT_LE(rep.lemma25_max, 2.0 + 1e-9);
  }
}

TEST(SparseBounds, MixedExponentsStableInDepth) {
  Rng rng(44);
  for (int trial = 0; trial < 50; ++trial) {
    const CubeTree shallow(kUnit1, 10), deep(kUnit1, 14);
    const TreeMeasure g10 = random_cascade(shallow, 10, rng);
    const TreeMeasure g14 = TreeMeasure::from_leaves(deep, 10, g10.mass[10]);
    const TreeMeasure mu10 = random_cascade(shallow, 10, rng);
    const TreeMeasure mu14 = TreeMeasure::from_leaves(deep, 10, mu10.mass[10]);
    const SparseFamily f10 = build_sparse_family(g10), f14 = build_sparse_family(g14);
    const auto r10 = check_sparse_lemmas(f10, mu10, 0.5, 0.5, std::vector<double>(f10.size(), 1.0), mu10, 2.0);
    const auto r14 = check_sparse_lemmas(f14, mu14, 0.5, 0.5, std::vector<double>(f14.size(), 1.0), mu14, 2.0);
    EXPECT_LT(std::abs(r14.lemma25_max / r10.lemma25_max - 1.0), 0.1);
  }
}

TEST(SparseBounds, SingleCubeCarlesonRatioIsOne) {
  const CubeTree t(kUnit1, 4);
  const TreeMeasure leb = lebesgue(t);
  const SparseFamily fam = build_sparse_family(leb);
  ASSERT_EQ(fam.size(), 1u);
  const auto rep = check_sparse_lemmas(fam, leb, 1.0, 0.0, {3.0}, leb, 2.0);
  EXPECT_NEAR(rep.lemma26_ratio, 1.0, 1e-14);
}

TEST(SparseBounds, CarlesonRatioBounded) {
  Rng rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    const CubeTree t(kUnit1, 10);
    const SparseFamily fam = build_sparse_family(random_cascade(t, 10, rng));
    const TreeMeasure sigma = random_cascade(t, 10, rng);
    std::vector<double> lam(fam.size());
    for (double& l : lam) l = uniform01(rng);
    const auto rep = check_sparse_lemmas(fam, lebesgue(t), 1.0, 0.0, lam, sigma, 2.0);
    EXPECT_GE(rep.lemma26_ratio, 1.0 - 1e-12);
    EXPECT_TRUE(std::isfinite(rep.lemma26_ratio));
  }
}

TEST(Domination, ConstantStableAndAboveOne) {
  const DominationReport r1 = domination_constant(1, 0.5, 10, 10, 30, 30, 7);
  EXPECT_GE(r1.min_ratio, 1.0);
  EXPECT_LT(r1.drift, 0.1);
  const DominationReport r2 = domination_constant(2, 0.9, 6, 6, 20, 30, 8);
  EXPECT_GE(r2.min_ratio, 1.0);
  EXPECT_LT(r2.drift, 0.1);
}
