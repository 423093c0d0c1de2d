#pragma once

// Shifted dyadic grids D^t, t in {0,1,2}^n.  A cube at level k with index m
// and shift t realizes the half-open box
//     2^{-k} ([0,1)^n + m + (-1)^k t / 3).
// Corners are kept as exact integers c = 3m + (-1)^k t, so that
// corner * 3 * 2^k == c; floating point only enters in box().

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "wib/numeric.hpp"

namespace wib {

inline constexpr int kMaxLevel = 40;

using Point = std::array<double, kMaxDim>;

/// Axis-parallel box [lo, hi) in R^n.
struct Box {
  int n = 1;
  Point lo{};
  Point hi{};

  double side(int i) const { return hi[i] - lo[i]; }
  double volume() const {
    double v = 1.0;
    for (int i = 0; i < n; ++i) v *= side(i);
    return v;
  }
  Point center() const {
    Point c{};
    for (int i = 0; i < n; ++i) c[i] = 0.5 * (lo[i] + hi[i]);
    return c;
  }
  bool contains(const Point& x) const {
    for (int i = 0; i < n; ++i) {
      if (!(lo[i] <= x[i] && x[i] < hi[i])) return false;
    }
    return true;
  }
  /// Origin in the closure of the box.
  bool touches_origin() const {
    for (int i = 0; i < n; ++i) {
      if (lo[i] > 0.0 || hi[i] < 0.0) return false;
    }
    return true;
  }
  bool intersects(const Box& o) const {
    for (int i = 0; i < n; ++i) {
      if (!(lo[i] < o.hi[i] && o.lo[i] < hi[i])) return false;
    }
    return true;
  }
  static Box cube(int n, const Point& center, double side) {
    Box b{n, {}, {}};
    for (int i = 0; i < n; ++i) {
      b.lo[i] = center[i] - 0.5 * side;
      b.hi[i] = center[i] + 0.5 * side;
    }
    return b;
  }
};

struct Ball {
  int n = 1;
  Point center{};
  double radius = 1.0;

  Ball() = default;
  Ball(int dim, const Point& c, double r) : n(dim), center(c), radius(r) {
    if (!(r > 0.0)) throw std::invalid_argument("ball radius must be positive");
  }
  double center_norm() const {
    double s = 0;
    for (int i = 0; i < n; ++i) s += center[i] * center[i];
    return std::sqrt(s);
  }
};

inline double norm(const Point& x, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += x[i] * x[i];
  return std::sqrt(s);
}

struct Cube {
  int n = 1;
  int level = 0;
  std::array<int, kMaxDim> shift{};
  std::array<std::int64_t, kMaxDim> index{};

  int sign() const { return (level % 2 == 0) ? 1 : -1; }

  /// 3 * 2^level * (lower corner)_i, exact.
  std::int64_t scaled_corner(int i) const { return 3 * index[i] + sign() * shift[i]; }

  double side() const { return std::ldexp(1.0, -level); }
  double volume() const { return std::ldexp(1.0, -level * n); }
  double corner(int i) const {
    return std::ldexp(static_cast<double>(scaled_corner(i)), -level) / 3.0;
  }
  Box box() const {
    Box b{n, {}, {}};
    for (int i = 0; i < n; ++i) {
      b.lo[i] = corner(i);
      b.hi[i] = std::ldexp(static_cast<double>(scaled_corner(i) + 3), -level) / 3.0;
    }
    return b;
  }
  Point center() const { return box().center(); }
  double center_norm() const { return norm(center(), n); }

  bool operator==(const Cube& o) const {
    if (n != o.n || level != o.level) return false;
    for (int i = 0; i < n; ++i) {
      if (shift[i] != o.shift[i] || index[i] != o.index[i]) return false;
    }
    return true;
  }
};

struct CubeHash {
  std::size_t operator()(const Cube& c) const {
    std::size_t h = std::hash<int>{}(c.level * 31 + c.n);
    for (int i = 0; i < c.n; ++i) {
      h ^= std::hash<std::int64_t>{}(c.index[i] * 3 + c.shift[i]) + 0x9e3779b97f4a7c15ULL +
           (h << 6) + (h >> 2);
    }
    return h;
  }
};

using Shift = std::array<int, kMaxDim>;

inline void check_dimension(int n) {
  if (n < 1 || n > kMaxDim) throw std::invalid_argument("dimension must be in [1, 4]");
}

inline Cube make_cube(int n, const Shift& shift, int level, const std::array<std::int64_t, kMaxDim>& index) {
  check_dimension(n);
  if (level < -kMaxLevel || level > kMaxLevel) {
    throw std::range_error("cube level outside [-40, 40]");
  }
  Cube c;
  c.n = n;
  c.level = level;
  for (int i = 0; i < n; ++i) {
    if (shift[i] < 0 || shift[i] > 2) throw std::invalid_argument("shift entries must lie in {0,1,2}");
    c.shift[i] = shift[i];
    c.index[i] = index[i];
  }
  return c;
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Child selected by the bit pattern `which` (bit i set: upper half along axis i).
inline Cube child(const Cube& q, unsigned which) {
  if (q.level >= kMaxLevel) throw std::range_error("child level exceeds 40");
  Cube c = q;
  c.level = q.level + 1;
  for (int i = 0; i < q.n; ++i) {
    c.index[i] = 2 * q.index[i] + q.sign() * q.shift[i] + ((which >> i) & 1u);
  }
  return c;
}

/// The 2^n children in bit-pattern order; they tile the parent.
inline std::vector<Cube> children(const Cube& q) {
  std::vector<Cube> out;
  out.reserve(std::size_t{1} << q.n);
  for (unsigned w = 0; w < (1u << q.n); ++w) out.push_back(child(q, w));
  return out;
}

inline Cube parent(const Cube& q) {
  if (q.level <= -kMaxLevel) throw std::range_error("parent level below -40");
  Cube p = q;
  p.level = q.level - 1;
  for (int i = 0; i < q.n; ++i) {
    p.index[i] = floor_div(q.index[i] - p.sign() * q.shift[i], 2);
  }
  return p;
}

inline Cube ancestor(Cube q, int level) {
  while (q.level > level) q = parent(q);
  return q;
}

/// Exact containment for cubes of the same grid: outer ⊇ inner.
inline bool contains(const Cube& outer, const Cube& inner) {
  if (outer.n != inner.n || inner.level < outer.level) return false;
  for (int i = 0; i < outer.n; ++i) {
    if (outer.shift[i] != inner.shift[i]) return false;
  }
  return ancestor(inner, outer.level) == outer;
}

/// Interval test on exact scaled corners; valid across different shifts.
inline bool boxes_overlap_exact(const Cube& a, const Cube& b) {
  const int top = std::max(a.level, b.level);
  for (int i = 0; i < a.n; ++i) {
    const __int128 sa = static_cast<__int128>(a.scaled_corner(i)) << (top - a.level);
    const __int128 sb = static_cast<__int128>(b.scaled_corner(i)) << (top - b.level);
    const __int128 la = static_cast<__int128>(3) << (top - a.level);
    const __int128 lb = static_cast<__int128>(3) << (top - b.level);
    if (!(sa < sb + lb && sb < sa + la)) return false;
  }
  return true;
}

/// Unique cube of D^shift at `level` whose half-open box contains x.
inline Cube locate(int n, const Point& x, int level, const Shift& shift) {
  Cube c = make_cube(n, shift, level, {});
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) throw std::invalid_argument("locate: non-finite coordinate");
    const double scaled = std::ldexp(x[i], level) - c.sign() * shift[i] / 3.0;
    auto m = static_cast<std::int64_t>(std::floor(scaled));
    c.index[i] = m;
    while (c.corner(i) > x[i]) c.index[i] -= 1;
    while (true) {
      Cube up = c;
      up.index[i] += 1;
      if (up.corner(i) <= x[i]) {
        c.index[i] += 1;
      } else {
        break;
      }
    }
  }
  return c;
}

/// All 3^n shifts in lexicographic order (first coordinate most significant).
inline std::vector<Shift> all_shifts(int n) {
  check_dimension(n);
  std::vector<Shift> out;
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    Shift t{};
    int rem = code;
    for (int i = n - 1; i >= 0; --i) {
      t[i] = rem % 3;
      rem /= 3;
    }
    out.push_back(t);
  }
  return out;
}

struct CoverResult {
  Shift shift{};
  Cube cube;
};

inline bool box_contains_ball(const Box& b, const Ball& ball) {
  for (int i = 0; i < ball.n; ++i) {
    if (!(b.lo[i] <= ball.center[i] - ball.radius && ball.center[i] + ball.radius < b.hi[i])) {
      return false;
    }
  }
  return true;
}

/// A shift t and Q in D^t with ball ⊆ Q and side(Q) <= 6 * radius.  Shifts are
/// tried in lexicographic order; within a shift the largest admissible side first.
inline CoverResult one_third_cover(const Ball& ball) {
  check_dimension(ball.n);
  const double cap = 6.0 * ball.radius;
  // smallest level k with 2^{-k} <= 6r
  int k_top = static_cast<int>(std::ceil(-std::log2(cap)));
  while (std::ldexp(1.0, -k_top) > cap) ++k_top;
  while (std::ldexp(1.0, -(k_top - 1)) <= cap) --k_top;
  for (const Shift& t : all_shifts(ball.n)) {
    for (int k = k_top; k <= k_top + 1; ++k) {
      if (k < -kMaxLevel || k > kMaxLevel) continue;
      if (std::ldexp(1.0, -k) < 2.0 * ball.radius) break;
      Cube q = locate(ball.n, ball.center, k, t);
      if (box_contains_ball(q.box(), ball)) return {t, q};
    }
  }
  throw std::logic_error("one_third_cover: no admissible cube found");
}

/// Case split for cubes relative to the origin: Case 1 when the cube misses
/// the centered cube of side 2*sqrt(n)*side(Q).
enum class CubeCase { kFar = 1, kNearOrigin = 2 };

inline CubeCase classify(const Box& q) {
  const double l = q.side(0);
  const double half = std::sqrt(static_cast<double>(q.n)) * l;
  Box core{q.n, {}, {}};
  for (int i = 0; i < q.n; ++i) {
    core.lo[i] = -half;
    core.hi[i] = half;
  }
  for (int i = 0; i < q.n; ++i) {
    if (q.hi[i] <= core.lo[i] || core.hi[i] <= q.lo[i]) return CubeCase::kFar;
  }
  return CubeCase::kNearOrigin;
}

}  // namespace wib
