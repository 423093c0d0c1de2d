#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "wib/geometry.hpp"
#include "wib/tree.hpp"

namespace wib {

using Rng = std::mt19937_64;

/// Uniform on [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<std::int64_t>(rng() % span);
}

inline Point uniform_point(Rng& rng, const Box& b) {
  Point x{};
  for (int i = 0; i < b.n; ++i) x[i] = uniform(rng, b.lo[i], b.hi[i]);
  return x;
}

/// Random multiplicative cascade on a tree: each node splits its mass among its
/// children in proportion to u^3, u uniform.  Heavy-tailed at every scale, so
/// stopping-time families are non-trivial.
inline TreeMeasure random_cascade(const CubeTree& tree, int resolution, Rng& rng) {
  std::vector<double> cur{1.0};
  const unsigned kids = 1u << tree.n();
  for (int j = 0; j < resolution; ++j) {
    std::vector<double> next(tree.count(j + 1), 0.0);
    for (std::size_t f = 0; f < tree.count(j); ++f) {
      double w[16];
      double s = 0.0;
      for (unsigned b = 0; b < kids; ++b) {
        const double u = uniform01(rng);
        w[b] = u * u * u + 1e-6;
        s += w[b];
      }
      for (unsigned b = 0; b < kids; ++b) next[tree.child(j, f, b)] = cur[f] * w[b] / s;
    }
    cur = std::move(next);
  }
  return TreeMeasure::from_leaves(tree, resolution, std::move(cur));
}

}  // namespace wib
