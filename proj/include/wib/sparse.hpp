#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "wib/geometry.hpp"
#include "wib/numeric.hpp"
#include "wib/random.hpp"
#include "wib/tree.hpp"

namespace wib {

struct SparseNode {
  int level = 0;  ///< relative to the root
  std::size_t flat = 0;
  Cube cube;
  int parent = -1;  ///< selecting family member, -1 for the root
  std::vector<int> stop_children;
  double witness = 0.0;  ///< |E_Q| = |Q| - sum of |stopping children|
};

struct SparseFamily {
  CubeTree tree;
  double threshold_factor = 2.0;
  std::vector<SparseNode> nodes;  ///< parents precede children; nodes[0] is the root

  std::size_t size() const { return nodes.size(); }
  Shift shift() const { return tree.root.shift; }
};

/// Stopping-time family: starting from the root, the maximal descendants whose
/// average exceeds factor times the average of the selecting cube are
/// selected, recursively, down to the tree depth.
inline SparseFamily build_sparse_family(const TreeMeasure& g, double threshold_factor = 2.0) {
  if (g.tree.depth > 24) throw std::invalid_argument("sparse family depth must be <= 24");
  if (!(threshold_factor >= 2.0)) throw std::invalid_argument("threshold factor must be >= 2");
  const CubeTree& t = g.tree;
  const int n = t.n();
  const unsigned kids = 1u << n;
  SparseFamily fam;
  fam.tree = t;
  fam.threshold_factor = threshold_factor;

  SparseNode root;
  root.cube = t.root;
  root.witness = t.root.volume();
  fam.nodes.push_back(root);
  if (!(g.at(0, 0) > 0.0)) return fam;

  std::vector<int> work{0};
  std::vector<std::pair<int, std::size_t>> stack;
  while (!work.empty()) {
    const int id = work.back();
    work.pop_back();
    const int j0 = fam.nodes[id].level;
    const std::size_t f0 = fam.nodes[id].flat;
    const double m0 = g.at(j0, f0);
    std::vector<std::pair<int, std::size_t>> found;
    stack.clear();
    for (int b = static_cast<int>(kids) - 1; b >= 0; --b) {
      if (j0 < t.depth) stack.push_back({j0 + 1, t.child(j0, f0, static_cast<unsigned>(b))});
    }
    while (!stack.empty()) {
      auto [j, f] = stack.back();
      stack.pop_back();
      // <g>_{Q'} > factor <g>_Q  <=>  m' 2^{n (j - j0)} > factor m
      const double scaled = std::ldexp(g.at(j, f), n * (j - j0));
      if (scaled > threshold_factor * m0) {
        found.push_back({j, f});
        continue;
      }
      if (j < t.depth) {
        for (int b = static_cast<int>(kids) - 1; b >= 0; --b) stack.push_back({j + 1, t.child(j, f, static_cast<unsigned>(b))});
      }
    }
    double stopped = 0.0;
    std::vector<int> new_ids;
    for (auto [j, f] : found) {
      SparseNode node;
      node.level = j;
      node.flat = f;
      node.cube = t.cube(j, f);
      node.parent = id;
      node.witness = node.cube.volume();
      stopped += node.cube.volume();
      new_ids.push_back(static_cast<int>(fam.nodes.size()));
      fam.nodes.push_back(node);
    }
    fam.nodes[id].stop_children = new_ids;
    fam.nodes[id].witness = fam.nodes[id].cube.volume() - stopped;
    for (auto it = new_ids.rbegin(); it != new_ids.rend(); ++it) work.push_back(*it);
  }
  return fam;
}

/// sum over the cubes Q in the collection with x in Q and side <= 6/lambda of
/// |Q|^{alpha/n - 1} g(Q).
inline double local_riesz_dyadic(const TreeMeasure& g, double alpha, double lambda, const Point& x) {
  const CubeTree& t = g.tree;
  const double cap = 6.0 / lambda;
  const int n = t.n();
  CompensatedSum sum;
  for (int j = 0; j <= t.depth; ++j) {
    std::size_t f;
    if (!t.locate(j, x, f)) return sum.value();
    const double side = std::ldexp(t.root.side(), -j);
    if (side > cap) continue;
    const double vol = g.volume(j);
    sum.add(std::pow(vol, alpha / n - 1.0) * g.at(j, f));
  }
  return sum.value();
}

inline double local_riesz_sparse(const SparseFamily& fam, const TreeMeasure& g, double alpha, double lambda,
                                 const Point& x) {
  const double cap = 6.0 / lambda;
  const int n = fam.tree.n();
  if (!fam.tree.root.box().contains(x)) return 0.0;
  CompensatedSum sum;
  int id = 0;
  while (id >= 0) {
    const SparseNode& node = fam.nodes[id];
    if (node.cube.side() <= cap) {
      sum.add(std::pow(node.cube.volume(), alpha / n - 1.0) * g.at(node.level, node.flat));
    }
    int next = -1;
    for (int c : node.stop_children) {
      if (fam.nodes[c].cube.box().contains(x)) {
        next = c;
        break;
      }
    }
    id = next;
  }
  return sum.value();
}

struct SparseLemmaReport {
  std::vector<double> lemma25_ratio;  ///< per family member
  double lemma25_max = 0.0;
  std::size_t lemma25_skipped = 0;
  double lemma26_lhs = 0.0;  ///< || sum lambda_Q chi_Q ||^p_{L^p(sigma)}
  double lemma26_rhs = 0.0;  ///< sum lambda_Q^p sigma(Q)
  double lemma26_ratio = 0.0;
  double min_witness_fraction = 1.0;  ///< min |E_Q| / |Q|
};

/// Packing ratios sum_{Q' in S, Q' in Q} |Q'|^{a1} mu(Q')^{a2} / (|Q|^{a1} mu(Q)^{a2}) and the
/// Carleson-sum ratio.  The L^p(sigma) norm is exact: the sum is constant on each
/// witness set E_Q, where it equals the sum of lambda over the members containing Q.
inline SparseLemmaReport check_sparse_lemmas(const SparseFamily& fam, const TreeMeasure& mu, double alpha1,
                                             double alpha2, const std::vector<double>& lambdas,
                                             const TreeMeasure& sigma, double p) {
  if (!(alpha1 > 0.0 && alpha2 >= 0.0 && alpha1 + alpha2 >= 1.0)) {
    throw std::invalid_argument("packing check needs alpha1 > 0, alpha2 >= 0, alpha1 + alpha2 >= 1");
  }
  if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
  const std::size_t N = fam.size();
  if (lambdas.size() != N) throw std::invalid_argument("one lambda per family member required");
  SparseLemmaReport rep;
  std::vector<double> own(N), total(N, 0.0);
  std::vector<bool> skip(N, false);
  for (std::size_t k = 0; k < N; ++k) {
    const SparseNode& q = fam.nodes[k];
    const double m = mu.at(q.level, q.flat);
    if (alpha2 > 0.0 && !(m > 0.0)) skip[k] = true;
    own[k] = std::pow(q.cube.volume(), alpha1) * (alpha2 > 0.0 ? std::pow(m, alpha2) : 1.0);
    rep.min_witness_fraction = std::min(rep.min_witness_fraction, q.witness / q.cube.volume());
  }
  // parents precede children, so a reverse sweep accumulates subtrees
  std::vector<CompensatedSum> acc(N);
  for (std::size_t k = N; k-- > 0;) {
    acc[k].add(own[k]);
    total[k] = acc[k].value();
    if (fam.nodes[k].parent >= 0) acc[fam.nodes[k].parent].add(total[k]);
  }
  rep.lemma25_ratio.assign(N, 0.0);
  for (std::size_t k = 0; k < N; ++k) {
    if (skip[k]) {
      ++rep.lemma25_skipped;
      continue;
    }
    rep.lemma25_ratio[k] = total[k] / own[k];
    rep.lemma25_max = std::max(rep.lemma25_max, rep.lemma25_ratio[k]);
  }
  CompensatedSum lhs, rhs;
  std::vector<double> cum(N);
  for (std::size_t k = 0; k < N; ++k) {
    const SparseNode& q = fam.nodes[k];
    cum[k] = lambdas[k] + (q.parent >= 0 ? cum[q.parent] : 0.0);
    double s_e = sigma.at(q.level, q.flat);
    for (int c : q.stop_children) s_e -= sigma.at(fam.nodes[c].level, fam.nodes[c].flat);
    s_e = std::max(s_e, 0.0);
    lhs.add(std::pow(cum[k], p) * s_e);
    rhs.add(std::pow(lambdas[k], p) * sigma.at(q.level, q.flat));
  }
  rep.lemma26_lhs = lhs.value();
  rep.lemma26_rhs = rhs.value();
  rep.lemma26_ratio = rep.lemma26_rhs > 0.0 ? rep.lemma26_lhs / rep.lemma26_rhs : 0.0;
  return rep;
}

struct DominationReport {
  int n = 1;
  double alpha = 0.5;
  int depth = 0;
  double constant = 0.0;        ///< max dyadic / sparse over all (g, x)
  double constant_deeper = 0.0;  ///< same at depth + 2
  double drift = 0.0;           ///< |deeper - constant| / constant
  double min_ratio = 0.0;       ///< never below 1: the family is a subcollection
  std::size_t pairs = 0;
};

/// Empirical constant C with I^D g(x) <= C I^S g(x), where S is the stopping
/// family of g.  The random g are cascades resolved at `resolution`; the same
/// g and points are reused at depth + 2.  The root has side 1 and lambda <= 6.
inline DominationReport domination_constant(int n, double alpha, int depth, int resolution, int g_count,
                                            int x_count, std::uint64_t seed, double lambda = 1.0,
                                            int workers = 1) {
  check_dimension(n);
  if (!(alpha > 0.0 && alpha < n)) throw std::invalid_argument("alpha must lie in (0, n)");
  if (resolution > depth) throw std::invalid_argument("resolution must not exceed depth");
  if (!(lambda > 0.0 && lambda <= 6.0)) throw std::invalid_argument("lambda must lie in (0, 6]");
  const Cube root = make_cube(n, Shift{}, 0, {});
  const CubeTree shallow(root, depth), deep(root, depth + 2);
  Rng rng(seed);
  struct Sample {
    std::vector<double> leaves;
    std::vector<Point> xs;
  };
  std::vector<Sample> samples(g_count);
  for (auto& s : samples) {
    const TreeMeasure g = random_cascade(shallow, resolution, rng);
    s.leaves = g.mass[resolution];
    for (int k = 0; k < x_count; ++k) s.xs.push_back(uniform_point(rng, root.box()));
  }
  DominationReport rep;
  rep.n = n;
  rep.alpha = alpha;
  rep.depth = depth;
  rep.pairs = static_cast<std::size_t>(g_count) * x_count;
  std::vector<double> cmax(g_count * 2, 0.0), cmin(g_count, 1e300);
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    for (int pass = 0; pass < 2; ++pass) {
      const CubeTree& t = pass == 0 ? shallow : deep;
      const TreeMeasure g = TreeMeasure::from_leaves(t, resolution, samples[i].leaves);
      const SparseFamily fam = build_sparse_family(g);
      for (const Point& x : samples[i].xs) {
        const double d = local_riesz_dyadic(g, alpha, lambda, x);
        const double s = local_riesz_sparse(fam, g, alpha, lambda, x);
        if (!(s > 0.0)) continue;
        cmax[2 * i + pass] = std::max(cmax[2 * i + pass], d / s);
        if (pass == 0) cmin[i] = std::min(cmin[i], d / s);
      }
    }
  });
  rep.min_ratio = 1e300;
  for (int i = 0; i < g_count; ++i) {
    rep.constant = std::max(rep.constant, cmax[2 * i]);
    rep.constant_deeper = std::max(rep.constant_deeper, cmax[2 * i + 1]);
    rep.min_ratio = std::min(rep.min_ratio, cmin[i]);
  }
  rep.drift = rep.constant > 0.0 ? std::abs(rep.constant_deeper - rep.constant) / rep.constant : 0.0;
  return rep;
}

}  // namespace wib
