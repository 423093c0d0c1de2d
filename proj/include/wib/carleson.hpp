#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wib/geometry.hpp"
#include "wib/measures.hpp"
#include "wib/numeric.hpp"
#include "wib/parallel.hpp"
#include "wib/params.hpp"
#include "wib/tree.hpp"

namespace wib {

/// Truncated Carleson sums
///   S(Q) = sum_{Q' in D(Q)} |Q'|^{p'(alpha/n - 1)} mu w(Q')^{p'} sigma(Q'),  Xi(Q) = S(Q) / mu w(Q).
/// The tree below a root is cut `depth` levels below the deepest ancestor that
/// contains the origin, following the origin for at most `chain` extra levels;
/// chain = 0 is the plain depth truncation.
///
/// For power weights all quantities are homogeneous: a cube at level k with
/// scaled corner c has S(Q) = 2^{-k gamma} S(c), with S(c) evaluated on the
/// normalized cube c/3 + [0,1)^n, so subtrees are memoized by (c, depth state)
/// and shared across levels.
class CarlesonEngine {
 public:
  struct Result {
    double S = 0.0;
    double xi = 0.0;      ///< Xi of the evaluated cube
    double xi_max = 0.0;  ///< sup of Xi over the evaluated subtree
    int arg_level = 0;    ///< relative level of the maximizer
    std::array<std::int64_t, kMaxDim> arg_local{};
    std::size_t skipped = 0;  ///< cubes with mu w(Q) = 0
  };

  explicit CarlesonEngine(const Params& prm, double tol = 1e-8, std::shared_ptr<MeasureCache> cache = nullptr)
      : prm_(prm), tol_(tol), homogeneous_(true), cache_(cache ? cache : std::make_shared<MeasureCache>()) {
    prm_.validate_kernel();
    init_exponents(prm_.sigma_exponent(), prm_.muw_exponent());
  }

  /// Caller-supplied densities for sigma and mu w.
  CarlesonEngine(const Params& prm, WeightSpec sigma, WeightSpec muw, double tol = 1e-8)
      : prm_(prm), tol_(tol), homogeneous_(false), sigma_(std::move(sigma)), muw_(std::move(muw)) {
    prm_.validate_kernel();
    init_exponents(sigma_.exponent, muw_.exponent);
  }

  const Params& params() const { return prm_; }
  bool converged() const { return converged_; }

  double muw(const Cube& q) const { return measure(q, e_mu_, muw_); }
  double sigma(const Cube& q) const { return measure(q, e_sigma_, sigma_); }
  double a_term(const Cube& q) const {
    return std::pow(q.volume(), pd_ * (prm_.alpha / prm_.n - 1.0)) * std::pow(muw(q), pd_) * sigma(q);
  }

  Result evaluate(const Cube& q, int depth, int chain = 0) const {
    if (depth < 0 || depth > 30) throw std::invalid_argument("carleson depth must be in [0, 30]");
    if (chain < 0) throw std::invalid_argument("chain extension must be >= 0");
    if (q.level + depth + chain > kMaxLevel) throw std::range_error("carleson tree extends beyond level 40");
    const auto c = scaled_corners(q);
    const bool origin = contains_origin(q.n, c);
    Result r = eval(q.level, c, depth, origin ? chain : 0, depth);
    if (homogeneous_) {
      const double k = q.level;
      r.S *= std::exp2(-k * gamma_);
      r.xi *= std::exp2(-k * beta_);
      r.xi_max *= std::exp2(-k * beta_);
    }
    return r;
  }

 private:
  struct Key {
    int level;
    std::array<std::int64_t, kMaxDim> c;
    int r, e, D;
    bool operator==(const Key& o) const {
      return level == o.level && c == o.c && r == o.r && e == o.e && D == o.D;
    }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 1469598103934665603ULL;
      auto mix = [&h](std::uint64_t v) { h = (h ^ v) * 1099511628211ULL; };
      mix(static_cast<std::uint64_t>(k.level));
      for (auto v : k.c) mix(static_cast<std::uint64_t>(v));
      mix(static_cast<std::uint64_t>(k.r));
      mix(static_cast<std::uint64_t>(k.e) << 8 | static_cast<std::uint64_t>(k.D));
      return static_cast<std::size_t>(h);
    }
  };

  void init_exponents(double e_sigma, double e_mu) {
    pd_ = prm_.p_dual();
    e_sigma_ = e_sigma;
    e_mu_ = e_mu;
    const int n = prm_.n;
    gamma_ = pd_ * (prm_.alpha - n) + pd_ * (n + e_mu_) + n + e_sigma_;
    beta_ = gamma_ - (n + e_mu_);
  }

  static bool contains_origin(int n, const std::array<std::int64_t, kMaxDim>& c) {
    for (int i = 0; i < n; ++i) {
      if (!(c[i] > -3 && c[i] <= 0)) return false;
    }
    return true;
  }

  double measure(const Cube& q, double e, const WeightSpec& custom) const {
    if (homogeneous_) return cached_power_integral(e, q, tol_, cache_.get()).value;
    const WeightIntegral v = integrate_weight(custom, q, tol_);
    if (!v.converged) converged_ = false;
    return v.value;
  }

  /// Measure of the node (normalized for homogeneous weights).
  double node_measure(int level, const std::array<std::int64_t, kMaxDim>& c, double e,
                      const WeightSpec& custom) const {
    if (homogeneous_) {
      const WeightIntegral v = normalized_power_integral(prm_.n, c, e, tol_, cache_.get());
      if (!v.converged) converged_ = false;
      return v.value;
    }
    Box b{prm_.n, {}, {}};
    for (int i = 0; i < prm_.n; ++i) {
      b.lo[i] = std::ldexp(static_cast<double>(c[i]), -level) / 3.0;
      b.hi[i] = std::ldexp(static_cast<double>(c[i] + 3), -level) / 3.0;
    }
    const WeightIntegral v = integrate_weight(custom, b, tol_);
    if (!v.converged) converged_ = false;
    return v.value;
  }

  Result eval(int level, const std::array<std::int64_t, kMaxDim>& c, int r, int e, int D) const {
    const int n = prm_.n;
    const Key key{homogeneous_ ? 0 : level, c, r, e, D};
    if (r >= 2) {
      std::lock_guard<std::mutex> lock(memo_mutex_);
      auto it = memo_.find(key);
      if (it != memo_.end()) return it->second;
    }
    const double mu = node_measure(level, c, e_mu_, muw_);
    const double sg = node_measure(level, c, e_sigma_, sigma_);
    const double vol = homogeneous_ ? 1.0 : std::ldexp(1.0, -n * level);
    CompensatedSum S;
    S.add(std::pow(vol, pd_ * (prm_.alpha / n - 1.0)) * std::pow(mu, pd_) * sg);
    Result out;
    const double s_scale = homogeneous_ ? std::exp2(-gamma_) : 1.0;
    const double x_scale = homogeneous_ ? std::exp2(-beta_) : 1.0;
    double child_best = -1.0;
    int child_level = 0;
    std::array<std::int64_t, kMaxDim> child_local{};
    if (r >= 1) {
      for (unsigned b = 0; b < (1u << n); ++b) {
        std::array<std::int64_t, kMaxDim> cc{};
        for (int i = 0; i < n; ++i) cc[i] = 2 * c[i] + 3 * static_cast<std::int64_t>((b >> i) & 1u);
        const bool origin = contains_origin(n, cc);
        const int rc = (origin && e > 0) ? D : r - 1;
        const int ec = (origin && e > 0) ? e - 1 : 0;
        const Result sub = eval(level + 1, cc, rc, ec, D);
        S.add(s_scale * sub.S);
        out.skipped += sub.skipped;
        const double xm = x_scale * sub.xi_max;
        if (xm > child_best) {
          child_best = xm;
          child_level = sub.arg_level + 1;
          for (int i = 0; i < n; ++i) {
            child_local[i] = (static_cast<std::int64_t>((b >> i) & 1u) << sub.arg_level) + sub.arg_local[i];
          }
        }
      }
    }
    out.S = S.value();
    if (mu > 0.0) {
      out.xi = out.S / mu;
    } else {
      out.xi = std::numeric_limits<double>::quiet_NaN();
      ++out.skipped;
    }
    if (mu > 0.0 && out.xi >= child_best) {
      out.xi_max = out.xi;
      out.arg_level = 0;
      out.arg_local = {};
    } else {
      out.xi_max = std::max(child_best, 0.0);
      out.arg_level = child_level;
      out.arg_local = child_local;
    }
    if (r >= 2) {
      std::lock_guard<std::mutex> lock(memo_mutex_);
      memo_.emplace(key, out);
    }
    return out;
  }

  Params prm_;
  double tol_;
  bool homogeneous_;
  WeightSpec sigma_, muw_;
  std::shared_ptr<MeasureCache> cache_;
  double pd_ = 2.0, e_sigma_ = 0.0, e_mu_ = 0.0, gamma_ = 0.0, beta_ = 0.0;
  mutable std::atomic<bool> converged_{true};
  mutable std::mutex memo_mutex_;
  mutable std::unordered_map<Key, Result, KeyHash> memo_;
};


struct CarlesonReport {
  Params params;
  Cube root;
  int depth = 0;
  int chain = 0;
  std::vector<std::pair<Cube, double>> perCube;  ///< filled by carleson_profile for chain = 0
  double rootXi = 0.0;
  double supValue = 0.0;
  Cube argmax;
  bool depthStable = true;
  double stabilityChange = 0.0;  ///< relative change of supValue at depth + 2
  std::size_t skipped = 0;
  bool converged = true;
};

struct CarlesonOptions {
  int chain = 0;
  bool check_stability = true;
  double stability_threshold = 0.01;
  bool per_cube = true;
};

/// Relative change of the subtree sup when the truncation is deepened by two levels.
inline double depth_change(const CarlesonEngine& eng, const Cube& q, int depth, int chain, double value) {
  const int chain2 = chain > 0 ? chain + 2 : 0;
  const double deeper = eng.evaluate(q, depth + 2, chain2).xi_max;
  return value > 0.0 ? std::abs(deeper - value) / value : (deeper > 0.0 ? 1.0 : 0.0);
}

/// Xi over the truncated tree of `root`.  With chain = 0 the per-cube table is
/// produced by one bottom-up pass over the level arrays.
inline CarlesonReport carleson_profile(const CarlesonEngine& eng, const Cube& root, int depth,
                                       const CarlesonOptions& opt = {}) {
  CarlesonReport rep;
  rep.params = eng.params();
  rep.root = root;
  rep.depth = depth;
  rep.chain = opt.chain;
  const CarlesonEngine::Result top = eng.evaluate(root, depth, opt.chain);
  rep.rootXi = top.xi;
  rep.supValue = top.xi_max;
  rep.skipped = top.skipped;
  rep.argmax = CubeTree(root, 0).cube_local(top.arg_level, top.arg_local);
  if (opt.per_cube && opt.chain == 0) {
    const CubeTree tree(root, depth);
    const int n = root.n;
    std::vector<std::vector<double>> S(depth + 1), mu(depth + 1);
    for (int j = depth; j >= 0; --j) {
      S[j].resize(tree.count(j));
      mu[j].resize(tree.count(j));
      for (std::size_t f = 0; f < tree.count(j); ++f) {
        const Cube q = tree.cube(j, f);
        mu[j][f] = eng.muw(q);
        CompensatedSum s;
        s.add(eng.a_term(q));
        if (j < depth) {
          for (unsigned b = 0; b < (1u << n); ++b) s.add(S[j + 1][tree.child(j, f, b)]);
        }
        S[j][f] = s.value();
      }
    }
    double best = -1.0;
    for (int j = 0; j <= depth; ++j) {
      for (std::size_t f = 0; f < tree.count(j); ++f) {
        if (!(mu[j][f] > 0.0)) continue;
        const double xi = S[j][f] / mu[j][f];
        const Cube q = tree.cube(j, f);
        rep.perCube.emplace_back(q, xi);
        if (xi > best) {
          best = xi;
          rep.argmax = q;
        }
      }
    }
    rep.rootXi = mu[0][0] > 0.0 ? S[0][0] / mu[0][0] : std::numeric_limits<double>::quiet_NaN();
    rep.supValue = std::max(best, 0.0);
  }
  if (opt.check_stability) {
    rep.stabilityChange = depth_change(eng, root, depth, opt.chain, rep.supValue);
    rep.depthStable = rep.stabilityChange < opt.stability_threshold;
  }
  rep.converged = eng.converged();
  return rep;
}

// ---------------------------------------------------------------------------
// C_1(lambda): sup of Xi over all shifted grids and cubes of side <= 6/lambda
// meeting a region.

struct C1Result {
  double lambda = 0.0;
  double value = 0.0;
  Cube argmax;
  double top_side = 0.0;  ///< side of the scanned root cubes
  std::size_t roots = 0;
  bool empty = false;
  bool depthStable = true;
  double stabilityChange = 0.0;
  bool converged = true;
};

/// Cubes of D^t at `level` whose boxes meet the region.
inline std::vector<Cube> cubes_meeting(const Box& region, int level, const Shift& t) {
  const int n = region.n;
  std::array<std::int64_t, kMaxDim> lo{}, hi{};
  Point a = region.lo, b = region.hi;
  for (int i = 0; i < n; ++i) {
    lo[i] = locate(n, a, level, t).index[i];
    Point bb = b;
    bb[i] = std::nextafter(b[i], -std::numeric_limits<double>::infinity());
    hi[i] = locate(n, bb, level, t).index[i];
  }
  std::vector<Cube> out;
  std::array<std::int64_t, kMaxDim> idx = lo;
  while (true) {
    out.push_back(make_cube(n, t, level, idx));
    int i = 0;
    while (i < n && ++idx[i] > hi[i]) {
      idx[i] = lo[i];
      ++i;
    }
    if (i == n) break;
  }
  return out;
}

inline C1Result c1_of_lambda(const CarlesonEngine& eng, double lambda, const Box& region, int depth, int workers = 1,
                             bool check_stability = true) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  const int n = eng.params().n;
  if (region.n != n) throw std::invalid_argument("region dimension mismatch");
  C1Result res;
  res.lambda = lambda;
  for (int i = 0; i < n; ++i) {
    if (!(region.hi[i] > region.lo[i])) {
      res.empty = true;
      return res;
    }
  }
  // largest dyadic side 2^{-k} <= 6 / lambda
  int k = static_cast<int>(std::ceil(-std::log2(6.0 / lambda)));
  while (std::ldexp(1.0, -k) > 6.0 / lambda) ++k;
  while (std::ldexp(1.0, -(k - 1)) <= 6.0 / lambda) --k;
  res.top_side = std::ldexp(1.0, -k);
  std::vector<Cube> roots;
  for (const Shift& t : all_shifts(n)) {
    for (const Cube& q : cubes_meeting(region, k, t)) roots.push_back(q);
  }
  res.roots = roots.size();
  if (roots.empty()) {
    res.empty = true;
    return res;
  }
  std::vector<CarlesonEngine::Result> vals(roots.size());
  parallel_for(roots.size(), workers, [&](std::size_t i) { vals[i] = eng.evaluate(roots[i], depth, 0); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < roots.size(); ++i) {
    if (vals[i].xi_max > vals[best].xi_max) best = i;
  }
  res.value = vals[best].xi_max;
  res.argmax = CubeTree(roots[best], 0).cube_local(vals[best].arg_level, vals[best].arg_local);
  if (check_stability) {
    res.stabilityChange = depth_change(eng, roots[best], depth, 0, res.value);
    res.depthStable = res.stabilityChange < 0.01;
  }
  res.converged = eng.converged();
  return res;
}

// ---------------------------------------------------------------------------
// Threshold scan over (a, delta)

struct ThresholdConfig {
  Params base;                     ///< n, p, alpha, theta
  std::vector<double> a_list;
  std::vector<double> delta_list;
  int depth = 6;
  int chain = 12;                  ///< extra levels followed along the origin
  std::vector<int> far_rings{2, 3, 4, 5, 6, 7, 8};  ///< |center| ~ 2^j
  double tol = 1e-8;
  int workers = 1;
};

struct ThresholdRow {
  double a = 0.0;
  double delta = 0.0;
  double side = 0.0;            ///< scanned cube side (largest dyadic <= delta)
  bool admissible = true;
  std::string reason;
  double sup_xi = 0.0;
  double origin_xi = 0.0;       ///< sup over the origin cubes of all shifts
  double argmax_side = 0.0;
  double argmax_center_norm = 0.0;
  Cube argmax;
  bool stable = true;
  double stability_change = 0.0;
  std::vector<double> far_xi;   ///< per ring
  std::vector<double> far_center_norm;
};

struct ThresholdFit {
  double a = 0.0;
  bool admissible = true;
  SlopeFit origin_volume_slope;  ///< log origin Xi against log |Q|
  SlopeFit far_center_slope;     ///< log Xi against log |center| at the largest delta
};

struct ThresholdTable {
  std::vector<ThresholdRow> rows;  ///< a-major, in the order of the lists
  std::vector<ThresholdFit> fits;
  bool converged = true;
};

inline int dyadic_level_at_most(double delta) {
  int k = static_cast<int>(std::ceil(-std::log2(delta)));
  while (std::ldexp(1.0, -k) > delta) ++k;
  while (std::ldexp(1.0, -(k - 1)) <= delta) --k;
  return k;
}

inline ThresholdTable threshold_scan(const ThresholdConfig& cfg) {
  if (cfg.a_list.empty() || cfg.delta_list.empty()) throw std::invalid_argument("threshold scan needs non-empty a and delta lists");
  const Params& base = cfg.base;
  base.validate_kernel();
  if (!(base.theta >= 0.0 && base.theta < (base.n - 1) * (base.p - 1.0))) {
    throw ParamError("theta outside [0, (n-1)(p-1))");
  }
  const int n = base.n;
  auto cache = std::make_shared<MeasureCache>();
  std::vector<std::unique_ptr<CarlesonEngine>> engines(cfg.a_list.size());
  ThresholdTable table;
  table.rows.resize(cfg.a_list.size() * cfg.delta_list.size());
  for (std::size_t ia = 0; ia < cfg.a_list.size(); ++ia) {
    Params prm = base;
    prm.a = cfg.a_list[ia];
    std::string why;
    const bool ok = prm.threshold_admissible(&why);
    if (ok) engines[ia] = std::make_unique<CarlesonEngine>(prm, cfg.tol, cache);
    for (std::size_t id = 0; id < cfg.delta_list.size(); ++id) {
      ThresholdRow& row = table.rows[ia * cfg.delta_list.size() + id];
      row.a = prm.a;
      row.delta = cfg.delta_list[id];
      if (!(row.delta > 0.0)) throw std::invalid_argument("delta values must be positive");
      row.side = std::ldexp(1.0, -dyadic_level_at_most(row.delta));
      row.admissible = ok;
      row.reason = why;
      if (!ok) {
        row.sup_xi = row.origin_xi = std::numeric_limits<double>::quiet_NaN();
        row.stable = false;
      }
    }
  }
  const std::vector<Shift> shifts = all_shifts(n);
  parallel_for(table.rows.size(), cfg.workers, [&](std::size_t r) {
    ThresholdRow& row = table.rows[r];
    if (!row.admissible) return;
    const CarlesonEngine& eng = *engines[r / cfg.delta_list.size()];
    const int k = dyadic_level_at_most(row.delta);
    struct Cand {
      Cube q;
      int depth;
      int chain;
      CarlesonEngine::Result res;
    };
    std::vector<Cand> cands;
    for (const Shift& t : shifts) cands.push_back({locate(n, Point{}, k, t), cfg.depth, cfg.chain, {}});
    for (int j : cfg.far_rings) {
      Point x{};
      x[0] = std::ldexp(1.0, j);
      cands.push_back({locate(n, x, k, Shift{}), cfg.depth, 0, {}});
    }
    for (auto& c : cands) c.res = eng.evaluate(c.q, c.depth, c.chain);
    std::size_t best = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (cands[i].res.xi > cands[best].res.xi) best = i;
      if (i < shifts.size()) row.origin_xi = std::max(row.origin_xi, cands[i].res.xi);
    }
    for (std::size_t i = shifts.size(); i < cands.size(); ++i) {
      row.far_xi.push_back(cands[i].res.xi);
      row.far_center_norm.push_back(cands[i].q.center_norm());
    }
    row.sup_xi = cands[best].res.xi;
    row.argmax = cands[best].q;
    row.argmax_side = cands[best].q.side();
    row.argmax_center_norm = cands[best].q.center_norm();
    const int chain2 = cands[best].chain > 0 ? cands[best].chain + 2 : 0;
    const double deeper = eng.evaluate(cands[best].q, cands[best].depth + 2, chain2).xi;
    row.stability_change = std::abs(deeper - row.sup_xi) / row.sup_xi;
    row.stable = row.stability_change < 0.01;
  });
  for (std::size_t ia = 0; ia < cfg.a_list.size(); ++ia) {
    ThresholdFit fit;
    fit.a = cfg.a_list[ia];
    fit.admissible = engines[ia] != nullptr;
    if (engines[ia]) {
      table.converged = table.converged && engines[ia]->converged();
      std::vector<double> vol, xi;
      std::size_t widest = 0;
      for (std::size_t id = 0; id < cfg.delta_list.size(); ++id) {
        const ThresholdRow& row = table.rows[ia * cfg.delta_list.size() + id];
        vol.push_back(std::pow(row.side, n));
        xi.push_back(row.origin_xi);
        if (row.delta > table.rows[ia * cfg.delta_list.size() + widest].delta) widest = id;
      }
      bool distinct = false;
      for (double v : vol) distinct = distinct || v != vol.front();
      if (distinct) fit.origin_volume_slope = fit_loglog(vol, xi);
      const ThresholdRow& wrow = table.rows[ia * cfg.delta_list.size() + widest];
      if (wrow.far_xi.size() >= 2) fit.far_center_slope = fit_loglog(wrow.far_center_norm, wrow.far_xi);
    }
    table.fits.push_back(fit);
  }
  return table;
}

}  // namespace wib
