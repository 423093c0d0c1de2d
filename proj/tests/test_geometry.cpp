#include <gtest/gtest.h>

#include <set>

#include "wib/geometry.hpp"
#include "wib/random.hpp"

using namespace wib;

namespace {

Cube random_cube(Rng& rng, int n, int max_level) {
  Shift t{};
  std::array<std::int64_t, kMaxDim> m{};
  for (int i = 0; i < n; ++i) {
    t[i] = static_cast<int>(uniform_int(rng, 0, 2));
    m[i] = uniform_int(rng, -1000, 1000);
  }
  return make_cube(n, t, static_cast<int>(uniform_int(rng, -max_level, max_level)), m);
}

}  // namespace

TEST(MakeCube, UnitCube) {
  const Box b = make_cube(1, Shift{}, 0, {}).box();
  EXPECT_EQ(b.lo[0], 0.0);
  EXPECT_EQ(b.hi[0], 1.0);
}

TEST(MakeCube, ShiftedOddLevel) {
  const Box b = make_cube(1, Shift{1}, 1, {}).box();
  EXPECT_DOUBLE_EQ(b.lo[0], -1.0 / 6.0);
  EXPECT_DOUBLE_EQ(b.hi[0], 1.0 / 3.0);
}

TEST(MakeCube, TwoDimensionalShift) {
  const Cube q = make_cube(2, Shift{1, 2}, 2, {});
  const Box b = q.box();
  EXPECT_DOUBLE_EQ(b.lo[0], 1.0 / 12.0);
  EXPECT_DOUBLE_EQ(b.lo[1], 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(b.hi[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(b.hi[1], 5.0 / 12.0);
  EXPECT_EQ(q.side(), 0.25);
}

TEST(MakeCube, RejectsBadInput) {
  EXPECT_THROW(make_cube(1, Shift{3}, 0, {}), std::invalid_argument);
  EXPECT_THROW(make_cube(1, Shift{}, 41, {}), std::range_error);
}

TEST(Children, UnitInterval) {
  const auto kids = children(make_cube(1, Shift{}, 0, {}));
  ASSERT_EQ(kids.size(), 2u);
  EXPECT_EQ(kids[0].box().lo[0], 0.0);
  EXPECT_EQ(kids[0].box().hi[0], 0.5);
  EXPECT_EQ(kids[1].box().lo[0], 0.5);
  EXPECT_EQ(kids[1].box().hi[0], 1.0);
}

TEST(Children, ShiftedMatchesEnumeration) {
  const Cube q = make_cube(1, Shift{1}, 0, {});
  EXPECT_DOUBLE_EQ(q.box().lo[0], 1.0 / 3.0);
  std::set<std::int64_t> enumerated;
  for (std::int64_t m = -10; m <= 10; ++m) {
    const Cube c = make_cube(1, Shift{1}, 1, {m});
    if (contains(q, c)) enumerated.insert(c.index[0]);
  }
  std::set<std::int64_t> kids;
  for (const Cube& c : children(q)) kids.insert(c.index[0]);
  EXPECT_EQ(kids, enumerated);
  const auto ch = children(q);
  EXPECT_DOUBLE_EQ(ch[0].box().lo[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(ch[0].box().hi[0], 5.0 / 6.0);
  EXPECT_DOUBLE_EQ(ch[1].box().hi[0], 4.0 / 3.0);
}

TEST(Children, TileParentExactly) {
  Rng rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    const Cube q = random_cube(rng, n, 30);
    double vol = 0.0;
    std::set<std::vector<std::int64_t>> corners;
    for (unsigned b = 0; b < (1u << n); ++b) {
      const Cube c = child(q, b);
      ASSERT_EQ(c.level, q.level + 1);
      ASSERT_EQ(c.shift, q.shift);
      ASSERT_TRUE(parent(c) == q);
      ASSERT_TRUE(contains(q, c));
      std::vector<std::int64_t> key;
      for (int i = 0; i < n; ++i) {
        ASSERT_EQ(c.scaled_corner(i), 2 * q.scaled_corner(i) + 3 * static_cast<std::int64_t>((b >> i) & 1u));
        key.push_back(c.scaled_corner(i));
      }
      corners.insert(key);
      vol += c.volume();
    }
    EXPECT_EQ(corners.size(), std::size_t{1} << n);
    EXPECT_EQ(vol, q.volume());
  }
}

TEST(Grid, DistinctIndicesAreDisjoint) {
  Rng rng(12);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    const Cube a = random_cube(rng, n, 20);
    Cube b = a;
    b.index[static_cast<int>(uniform_int(rng, 0, n - 1))] += uniform_int(rng, 1, 3) * (uniform01(rng) < 0.5 ? -1 : 1);
    EXPECT_FALSE(boxes_overlap_exact(a, b));
    EXPECT_TRUE(boxes_overlap_exact(a, a));
  }
}

TEST(Grid, NestedOrDisjointAcrossLevels) {
  Rng rng(13);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 2));
    const Cube a = random_cube(rng, n, 3);
    Cube b = a;
    const int d = static_cast<int>(uniform_int(rng, 1, 4));
    b.level = a.level + d;
    for (int i = 0; i < n; ++i) b.index[i] = a.index[i] * (std::int64_t{1} << d) + uniform_int(rng, -3, (1 << d) + 3);
    if (boxes_overlap_exact(a, b)) {
      EXPECT_TRUE(contains(a, b));
    }
  }
}

TEST(Grid, ShiftFormulaInFloatingPoint) {
  Rng rng(14);
  for (int trial = 0; trial < 5000; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    const Cube q = random_cube(rng, n, 40);
    for (int i = 0; i < n; ++i) {
      const long double sign = q.level % 2 == 0 ? 1.0L : -1.0L;
      const long double expect =
          std::ldexp(static_cast<long double>(q.index[i]) + sign * q.shift[i] / 3.0L, -q.level);
      const double lo = q.box().lo[i];
      EXPECT_LE(std::abs(static_cast<long double>(lo) - expect), 2e-16L * std::abs(expect) + 1e-300L);
    }
  }
}

TEST(Locate, ContainingCube) {
  const Cube q = locate(1, Point{0.9}, 0, Shift{});
  EXPECT_EQ(q.box().lo[0], 0.0);
  EXPECT_EQ(q.box().hi[0], 1.0);
  Rng rng(15);
  for (int trial = 0; trial < 5000; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    Point x{};
    for (int i = 0; i < n; ++i) x[i] = uniform(rng, -50, 50);
    Shift t{};
    for (int i = 0; i < n; ++i) t[i] = static_cast<int>(uniform_int(rng, 0, 2));
    const Cube c = locate(n, x, static_cast<int>(uniform_int(rng, -5, 20)), t);
    EXPECT_TRUE(c.box().contains(x));
  }
}

TEST(OneThirdCover, CenteredBall) {
  const Ball ball(1, Point{}, 0.4);
  const CoverResult r = one_third_cover(ball);
  EXPECT_GT(r.cube.side(), 0.8);
  EXPECT_LE(r.cube.side(), 2.4);
  EXPECT_TRUE(box_contains_ball(r.cube.box(), ball));
  // exhaustive search agrees that some admissible cube exists
  bool found = false;
  for (const Shift& t : all_shifts(1)) {
    for (int k = -3; k <= 3; ++k) {
      const Cube q = locate(1, Point{}, k, t);
      if (q.side() <= 2.4 && q.box().lo[0] <= -0.4 && 0.4 < q.box().hi[0]) found = true;
    }
  }
  EXPECT_TRUE(found);
}

TEST(OneThirdCover, RandomBalls) {
  Rng rng(16);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = static_cast<int>(uniform_int(rng, 1, 3));
    Point c{};
    for (int i = 0; i < n; ++i) c[i] = uniform(rng, -100, 100);
    const Ball ball(n, c, std::exp(uniform(rng, std::log(1e-6), std::log(1e3))));
    const CoverResult r = one_third_cover(ball);
    EXPECT_LE(r.cube.side(), 6.0 * ball.radius);
    const Box b = r.cube.box();
    for (int i = 0; i < n; ++i) {
      EXPECT_LE(b.lo[i], c[i] - ball.radius);
      EXPECT_GE(b.hi[i], c[i] + ball.radius);
    }
  }
}
