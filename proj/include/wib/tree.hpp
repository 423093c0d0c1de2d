#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "wib/geometry.hpp"
#include "wib/measures.hpp"
#include "wib/numeric.hpp"
#include "wib/parallel.hpp"

namespace wib {

/// The truncated tree of dyadic descendants of a root cube.  A node at relative
/// level j is addressed by its flat local index sum_i l_i 2^{j i}, where
/// l_i in [0, 2^j) counts sub-cubes along axis i.
struct CubeTree {
  Cube root;
  int depth = 0;

  CubeTree() = default;
  CubeTree(const Cube& r, int d) : root(r), depth(d) {
    if (d < 0 || d > 24) throw std::invalid_argument("tree depth must be in [0, 24]");
    if (r.level + d > kMaxLevel) throw std::range_error("tree extends beyond level 40");
    if (static_cast<long>(r.n) * d > 30) throw std::invalid_argument("tree too large (n * depth > 30)");
  }

  int n() const { return root.n; }
  std::size_t count(int j) const { return std::size_t{1} << (n() * j); }
  std::size_t total() const {
    std::size_t t = 0;
    for (int j = 0; j <= depth; ++j) t += count(j);
    return t;
  }

  std::array<std::int64_t, kMaxDim> local(int j, std::size_t flat) const {
    std::array<std::int64_t, kMaxDim> l{};
    const std::size_t mask = (std::size_t{1} << j) - 1;
    for (int i = 0; i < n(); ++i) l[i] = static_cast<std::int64_t>((flat >> (j * i)) & mask);
    return l;
  }
  std::size_t flat(int j, const std::array<std::int64_t, kMaxDim>& l) const {
    std::size_t f = 0;
    for (int i = 0; i < n(); ++i) f |= static_cast<std::size_t>(l[i]) << (j * i);
    return f;
  }
  std::size_t child(int j, std::size_t f, unsigned bits) const {
    auto l = local(j, f);
    for (int i = 0; i < n(); ++i) l[i] = 2 * l[i] + ((bits >> i) & 1u);
    return flat(j + 1, l);
  }
  std::size_t parent(int j, std::size_t f) const {
    auto l = local(j, f);
    for (int i = 0; i < n(); ++i) l[i] >>= 1;
    return flat(j - 1, l);
  }

  Cube cube(int j, std::size_t f) const { return cube_local(j, local(j, f)); }

  /// Scaled corners obey c' = 2c + 3b, so the node's corner is 2^j c_root + 3 l.
  Cube cube_local(int j, const std::array<std::int64_t, kMaxDim>& l) const {
    Cube c = root;
    c.level = root.level + j;
    for (int i = 0; i < n(); ++i) {
      const std::int64_t sc = (root.scaled_corner(i) << j) + 3 * l[i];
      c.index[i] = (sc - c.sign() * root.shift[i]) / 3;
    }
    return c;
  }

  /// Flat index at level j of the node containing x; false if x is outside the root.
  bool locate(int j, const Point& x, std::size_t& f) const {
    const Box b = root.box();
    if (!b.contains(x)) return false;
    const Cube c = wib::locate(n(), x, root.level + j, root.shift);
    std::array<std::int64_t, kMaxDim> l{};
    for (int i = 0; i < n(); ++i) {
      l[i] = (c.scaled_corner(i) - (root.scaled_corner(i) << j)) / 3;
      if (l[i] < 0 || l[i] >= (std::int64_t{1} << j)) return false;
    }
    f = flat(j, l);
    return true;
  }
};

/// Masses of every node of a CubeTree, level by level.
struct TreeMeasure {
  CubeTree tree;
  std::vector<std::vector<double>> mass;
  double rel_tol = 0.0;
  bool converged = true;

  double at(int j, std::size_t f) const { return mass[j][f]; }
  double volume(int j) const { return std::ldexp(tree.root.volume(), -tree.n() * j); }

  /// Fill levels above `from` by summing children in bit order.
  void sum_upwards(int from) {
    const unsigned kids = 1u << tree.n();
    for (int j = from - 1; j >= 0; --j) {
      for (std::size_t f = 0; f < tree.count(j); ++f) {
        CompensatedSum s;
        for (unsigned b = 0; b < kids; ++b) s.add(mass[j + 1][tree.child(j, f, b)]);
        mass[j][f] = s.value();
      }
    }
  }

  /// From masses of the nodes at relative level `resolution`; below it the
  /// density is constant on each resolution cell.
  static TreeMeasure from_leaves(const CubeTree& tree, int resolution, std::vector<double> leaves) {
    if (resolution < 0 || resolution > tree.depth) throw std::invalid_argument("resolution outside tree depth");
    if (leaves.size() != tree.count(resolution)) throw std::invalid_argument("leaf count does not match resolution");
    TreeMeasure tm;
    tm.tree = tree;
    tm.mass.resize(tree.depth + 1);
    for (int j = 0; j <= tree.depth; ++j) tm.mass[j].assign(tree.count(j), 0.0);
    tm.mass[resolution] = std::move(leaves);
    tm.sum_upwards(resolution);
    const double split = std::ldexp(1.0, -tree.n());
    for (int j = resolution; j < tree.depth; ++j) {
      for (std::size_t f = 0; f < tree.count(j); ++f) {
        for (unsigned b = 0; b < (1u << tree.n()); ++b) tm.mass[j + 1][tree.child(j, f, b)] = tm.mass[j][f] * split;
      }
    }
    return tm;
  }

  /// Leaves by quadrature of the weight, inner nodes by summation.
  static TreeMeasure from_weight(const CubeTree& tree, const WeightSpec& w, double tol = 1e-8,
                                 MeasureCache* cache = nullptr, int workers = 1) {
    TreeMeasure tm;
    tm.tree = tree;
    tm.mass.resize(tree.depth + 1);
    for (int j = 0; j <= tree.depth; ++j) tm.mass[j].assign(tree.count(j), 0.0);
    const int d = tree.depth;
    const std::size_t leaves = tree.count(d);
    std::vector<WeightIntegral> vals(leaves);
    parallel_for(leaves, workers, [&](std::size_t f) {
      const Cube c = tree.cube(d, f);
      if (w.is_power()) {
        vals[f] = cached_power_integral(w.exponent, c, tol, cache);
      } else {
        vals[f] = integrate_weight(w, c, tol);
      }
    });
    for (std::size_t f = 0; f < leaves; ++f) {
      tm.mass[d][f] = vals[f].value;
      tm.rel_tol = std::max(tm.rel_tol, vals[f].rel_err);
      tm.converged = tm.converged && vals[f].converged;
    }
    tm.sum_upwards(d);
    return tm;
  }
};

}  // namespace wib
