#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "wib/geometry.hpp"
#include "wib/numeric.hpp"
#include "wib/params.hpp"
#include "wib/quadrature.hpp"

namespace wib {

enum class WeightKind { kPower, kDualPower, kPotentialDensity, kCustom };

/// A weight on R^n.  Power kinds are |x|^exponent; custom weights carry an
/// evaluator and use `exponent` as the local behaviour at the origin.
struct WeightSpec {
  WeightKind kind = WeightKind::kPower;
  double exponent = 0.0;
  std::function<double(const Point&, int)> custom;
  std::function<double(double)> radial;  ///< optional radial profile for custom weights

  static WeightSpec power(double theta) { return {WeightKind::kPower, theta, {}, {}}; }
  static WeightSpec dual_power(double theta, double p) {
    return {WeightKind::kDualPower, theta * (1.0 - dual_exponent(p)), {}, {}};
  }
  static WeightSpec potential_density(double a, double theta, double p) {
    return {WeightKind::kPotentialDensity, a * p + theta, {}, {}};
  }
  static WeightSpec custom_weight(std::function<double(const Point&, int)> f, double origin_exponent) {
    return {WeightKind::kCustom, origin_exponent, std::move(f), {}};
  }
  static WeightSpec radial_weight(std::function<double(double)> g, double origin_exponent) {
    WeightSpec s{WeightKind::kCustom, origin_exponent, {}, g};
    s.custom = [g](const Point& x, int n) { return g(norm(x, n)); };
    return s;
  }

  bool is_power() const { return kind != WeightKind::kCustom; }
  bool is_radial() const { return is_power() || static_cast<bool>(radial); }

  double operator()(const Point& x, int n) const {
    if (is_power()) {
      if (exponent == 0.0) return 1.0;
      double r2 = 0;
      for (int i = 0; i < n; ++i) r2 += x[i] * x[i];
      return std::pow(r2, 0.5 * exponent);
    }
    return custom(x, n);
  }
  double at_radius(double r) const {
    if (is_power()) return exponent == 0.0 ? 1.0 : std::pow(r, exponent);
    if (!radial) throw std::logic_error("weight has no radial profile");
    return radial(r);
  }
  /// The weight raised to the power s.
  WeightSpec raised(double s) const {
    if (is_power()) return power(exponent * s);
    if (radial) {
      auto g = radial;
      return radial_weight([g, s](double r) { return std::pow(g(r), s); }, exponent * s);
    }
    auto f = custom;
    return custom_weight([f, s](const Point& x, int n) { return std::pow(f(x, n), s); },
                         exponent * s);
  }
};

struct WeightIntegral {
  double value = 0.0;
  double rel_err = 0.0;  ///< achieved relative error estimate
  bool converged = true;
};

inline void check_tolerance(double tol) {
  if (!(tol >= 1e-12 && tol <= 1e-2)) throw std::invalid_argument("tolerance must lie in [1e-12, 1e-2]");
}

namespace detail {

inline double tensor_gauss(const WeightSpec& w, const Box& b, const GaussRule& rule) {
  const int n = b.n;
  const int q = static_cast<int>(rule.nodes.size());
  std::array<int, kMaxDim> idx{};
  Point x{};
  double half[kMaxDim], mid[kMaxDim];
  for (int i = 0; i < n; ++i) {
    half[i] = 0.5 * b.side(i);
    mid[i] = 0.5 * (b.lo[i] + b.hi[i]);
  }
  CompensatedSum sum;
  while (true) {
    double wt = 1.0;
    for (int i = 0; i < n; ++i) {
      x[i] = mid[i] + half[i] * rule.nodes[idx[i]];
      wt *= rule.weights[idx[i]];
    }
    sum.add(wt * w(x, n));
    int i = 0;
    while (i < n && ++idx[i] == q) idx[i++] = 0;
    if (i == n) break;
  }
  double scale = 1.0;
  for (int i = 0; i < n; ++i) scale *= half[i];
  return sum.value() * scale;
}

struct AdaptiveBox {
  const WeightSpec& w;
  double tol;
  double floor_density;  ///< absolute acceptance floor per unit volume
  long boxes = 0;
  double err = 0.0;
  bool ok = true;
  static constexpr long kBoxBudget = 400000;
  static constexpr int kMaxDepth = 48;

  double run(const Box& b, int depth = 0) {
    ++boxes;
    // order 4 against 8 settles most cells away from the origin; then 8 against 16
    const double q4 = tensor_gauss(w, b, gauss_legendre(4));
    const double q8 = tensor_gauss(w, b, gauss_legendre(8));
    double diff = std::abs(q8 - q4);
    if (diff <= std::max(tol * std::abs(q8), floor_density * b.volume())) {
      err += diff;
      return q8;
    }
    const double hi = tensor_gauss(w, b, gauss_legendre(16));
    diff = std::abs(hi - q8);
    const double accept = std::max(tol * std::abs(hi), floor_density * b.volume());
    if (diff <= accept) {
      err += diff;
      return hi;
    }
    if (depth >= kMaxDepth || boxes >= kBoxBudget) {
      ok = false;
      err += diff;
      return hi;
    }
    return split(b, depth);
  }

  double split(const Box& b, int depth) {
    CompensatedSum s;
    const unsigned count = 1u << b.n;
    for (unsigned c = 0; c < count; ++c) {
      Box sub = b;
      for (int i = 0; i < b.n; ++i) {
        const double m = 0.5 * (b.lo[i] + b.hi[i]);
        if ((c >> i) & 1u) {
          sub.lo[i] = m;
        } else {
          sub.hi[i] = m;
        }
      }
      s.add(run(sub, depth + 1));
    }
    return s.value();
  }
};

/// Pieces of a \ (-h, h)^n as at most 2n boxes.
inline std::vector<Box> box_minus_centered_cube(const Box& a, double h) {
  std::vector<Box> out;
  Box rest = a;
  for (int i = 0; i < a.n; ++i) {
    if (rest.lo[i] < -h) {
      Box piece = rest;
      piece.hi[i] = std::min(rest.hi[i], -h);
      if (piece.hi[i] > piece.lo[i]) out.push_back(piece);
    }
    if (rest.hi[i] > h) {
      Box piece = rest;
      piece.lo[i] = std::max(rest.lo[i], h);
      if (piece.hi[i] > piece.lo[i]) out.push_back(piece);
    }
    rest.lo[i] = std::max(rest.lo[i], -h);
    rest.hi[i] = std::min(rest.hi[i], h);
    if (!(rest.hi[i] > rest.lo[i])) break;
  }
  return out;
}

}  // namespace detail

/// Integral of the weight over a box.  Boxes whose closure contains the origin
/// are decomposed into dyadic sup-norm shells; the shell sums beyond the
/// self-similar range form a geometric series with ratio 2^{-(n+exponent)}.
inline WeightIntegral integrate_weight(const WeightSpec& w, const Box& box, double tol = 1e-8) {
  check_tolerance(tol);
  check_dimension(box.n);
  const int n = box.n;
  WeightIntegral out;
  if (w.is_power() && w.exponent == 0.0) {
    out.value = box.volume();
    return out;
  }
  if (!box.touches_origin()) {
    detail::AdaptiveBox ad{w, tol, 0.0};
    const double ref = std::abs(detail::tensor_gauss(w, box, gauss_legendre(16)));
    ad.floor_density = tol * ref / box.volume();
    out.value = ad.run(box);
    out.converged = ad.ok;
    out.rel_err = out.value != 0.0 ? ad.err / std::abs(out.value) : 0.0;
    return out;
  }
  if (!(w.exponent > -n)) throw std::domain_error("weight not integrable at the origin");

  double rho = 0.0;
  double min_extent = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    rho = std::max({rho, std::abs(box.lo[i]), std::abs(box.hi[i])});
    if (box.lo[i] != 0.0) min_extent = std::min(min_extent, std::abs(box.lo[i]));
    if (box.hi[i] != 0.0) min_extent = std::min(min_extent, std::abs(box.hi[i]));
  }
  const double ratio = std::pow(2.0, -(n + w.exponent));
  const double floor_density = tol * std::abs(detail::tensor_gauss(w, box, gauss_legendre(16))) / box.volume();
  CompensatedSum total;
  double err = 0.0;
  bool ok = true;
  constexpr int kMaxShells = 4000;
  for (int j = 0; j < kMaxShells; ++j) {
    Box clipped = box;
    for (int i = 0; i < n; ++i) {
      clipped.lo[i] = std::max(box.lo[i], -rho);
      clipped.hi[i] = std::min(box.hi[i], rho);
    }
    CompensatedSum shell;
    double shell_err = 0.0;
    for (const Box& piece : detail::box_minus_centered_cube(clipped, 0.5 * rho)) {
      detail::AdaptiveBox ad{w, tol, floor_density};
      shell.add(ad.run(piece));
      shell_err += ad.err;
      ok = ok && ad.ok;
    }
    err += shell_err;
    const double s = shell.value();
    total.add(s);
    const bool self_similar = rho <= min_extent;
    if (self_similar) {
      const double tail = s * ratio / (1.0 - ratio);
      if (w.is_power() || std::abs(tail) <= 0.1 * tol * std::abs(total.value())) {
        total.add(tail);
        err += shell_err * ratio / (1.0 - ratio);
        out.value = total.value();
        out.converged = ok;
        out.rel_err = out.value != 0.0 ? err / std::abs(out.value) : 0.0;
        return out;
      }
    }
    rho *= 0.5;
  }
  out.value = total.value();
  out.converged = false;
  out.rel_err = out.value != 0.0 ? err / std::abs(out.value) : 0.0;
  return out;
}

inline WeightIntegral integrate_weight(const WeightSpec& w, const Cube& q, double tol = 1e-8) {
  return integrate_weight(w, q.box(), tol);
}

struct SphereMean {
  double value = 0.0;
  bool integrable = true;
  bool converged = true;
};

/// Average of a radial weight over the sphere {|y - x| = t}, |x| = r.
inline SphereMean sphere_mean(const WeightSpec& w, int n, double r, double t, double tol = 1e-6) {
  check_dimension(n);
  if (!w.is_radial()) throw std::invalid_argument("sphere_mean requires a radial weight");
  SphereMean out;
  if (n == 1) {
    const double d = std::abs(r - t);
    if (d == 0.0 && w.exponent <= 0.0 && w.exponent != 0.0) {
      out.integrable = false;
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    out.value = 0.5 * (w.at_radius(d) + w.at_radius(r + t));
    return out;
  }
  if (r == 0.0) {
    out.value = w.at_radius(t);
    return out;
  }
  if (t == 0.0) {
    out.value = w.at_radius(r);
    return out;
  }
  if (r == t && w.exponent <= 1.0 - n) {
    out.integrable = false;
    out.value = std::numeric_limits<double>::infinity();
    return out;
  }
  const double d2 = (r - t) * (r - t);
  const double rt4 = 4.0 * r * t;
  const int sp = n - 2;
  auto integrand = [&](double phi, double dl, double dr) {
    const double sh = std::sin(0.5 * dl);
    const double dist = std::sqrt(d2 + rt4 * sh * sh);
    const double s = phi < 0.5 * std::numbers::pi ? std::sin(dl) : std::sin(dr);
    double jac = 1.0;
    for (int k = 0; k < sp; ++k) jac *= s;
    return w.at_radius(dist) * jac;
  };
  const QuadResult q = tanh_sinh(integrand, 0.0, std::numbers::pi, tol * 0.1, 0.0, 10);
  const double z = std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (n - 1)) / std::tgamma(0.5 * n);
  out.value = q.value / z;
  out.converged = q.converged;
  return out;
}

/// Integral of a radial weight over a ball via |S^{n-1}| \int_0^R rho^{n-1} A_rho dr.
inline WeightIntegral integrate_weight(const WeightSpec& w, const Ball& ball, double tol = 1e-8) {
  check_tolerance(tol);
  check_dimension(ball.n);
  const int n = ball.n;
  if (!w.is_radial()) throw std::invalid_argument("ball integration requires a radial weight");
  WeightIntegral out;
  const double c = ball.center_norm();
  if (c <= ball.radius && !(w.exponent > -n)) throw std::domain_error("weight not integrable at the origin");
  bool ok = true;
  auto radial_part = [&](double rho, double, double) {
    const SphereMean m = sphere_mean(w, n, c, rho, std::max(1e-12, tol * 0.1));
    ok = ok && m.converged && m.integrable;
    return std::pow(rho, n - 1) * m.value;
  };
  CompensatedSum sum;
  double err = 0.0;
  if (c > 0.0 && c < ball.radius) {
    const QuadResult a = tanh_sinh(radial_part, 0.0, c, tol * 0.1);
    const QuadResult b = tanh_sinh(radial_part, c, ball.radius, tol * 0.1);
    sum.add(a.value);
    sum.add(b.value);
    err = a.error + b.error;
    ok = ok && a.converged && b.converged;
  } else {
    const QuadResult a = tanh_sinh(radial_part, 0.0, ball.radius, tol * 0.1);
    sum.add(a.value);
    err = a.error;
    ok = ok && a.converged;
  }
  const double area = unit_sphere_area(n);
  out.value = area * sum.value();
  out.rel_err = out.value != 0.0 ? area * err / std::abs(out.value) : 0.0;
  out.converged = ok;
  return out;
}

/// Closed radial form of \int_{B(0,r)} |x|^e dx.
inline double centered_ball_power_integral(int n, double e, double r) {
  if (!(n + e > 0)) throw std::domain_error("weight not integrable at the origin");
  return unit_sphere_area(n) * std::pow(r, n + e) / (n + e);
}

struct MeasureTriple {
  double wQ = 0.0;
  double sigmaQ = 0.0;
  double muwQ = 0.0;
  double relTol = 0.0;
  bool converged = true;
};

/// Memo table of power-weight integrals over normalized cubes
/// c/3 + [0,1)^n, keyed by (n, c, exponent).  A cube at level k with scaled
/// corner c satisfies \int_Q |x|^e = 2^{-k(n+e)} \int_{c/3+[0,1)^n} |x|^e, so one
/// entry serves every level.  Values are deterministic functions of the key, so
/// concurrent duplicates are harmless.
class MeasureCache {
 public:
  struct Key {
    int n;
    std::array<std::int64_t, kMaxDim> corner;
    double exponent;
    bool operator==(const Key& o) const {
      return n == o.n && corner == o.corner && exponent == o.exponent;
    }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t bits;
      std::memcpy(&bits, &k.exponent, sizeof bits);
      std::uint64_t h = 1469598103934665603ULL ^ static_cast<std::uint64_t>(k.n);
      for (int i = 0; i < k.n; ++i) h = (h ^ static_cast<std::uint64_t>(k.corner[i])) * 1099511628211ULL;
      return static_cast<std::size_t>((h ^ bits) * 1099511628211ULL);
    }
  };

  bool find(const Key& k, WeightIntegral& out) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = map_.find(k);
    if (it == map_.end()) return false;
    out = it->second;
    return true;
  }
  void insert(const Key& k, const WeightIntegral& v) {
    std::lock_guard<std::mutex> lock(mutex_);
    map_.emplace(k, v);
  }
  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return map_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::unordered_map<Key, WeightIntegral, KeyHash> map_;
};

/// \int_{c/3 + [0,1)^n} |x|^e dx.
inline WeightIntegral normalized_power_integral(int n, const std::array<std::int64_t, kMaxDim>& corner, double e,
                                                double tol, MeasureCache* cache) {
  if (e == 0.0) return {1.0, 0.0, true};
  MeasureCache::Key key{n, {}, e};
  for (int i = 0; i < n; ++i) key.corner[i] = corner[i];
  WeightIntegral v;
  if (cache && cache->find(key, v)) return v;
  Box b{n, {}, {}};
  for (int i = 0; i < n; ++i) {
    b.lo[i] = static_cast<double>(corner[i]) / 3.0;
    b.hi[i] = b.lo[i] + 1.0;
  }
  v = integrate_weight(WeightSpec::power(e), b, tol);
  if (cache) cache->insert(key, v);
  return v;
}

inline std::array<std::int64_t, kMaxDim> scaled_corners(const Cube& q) {
  std::array<std::int64_t, kMaxDim> c{};
  for (int i = 0; i < q.n; ++i) c[i] = q.scaled_corner(i);
  return c;
}

/// \int_Q |x|^e through the normalized cube; identical with or without a cache.
inline WeightIntegral cached_power_integral(double exponent, const Cube& q, double tol, MeasureCache* cache) {
  if (exponent == 0.0) return {q.volume(), 0.0, true};
  WeightIntegral v = normalized_power_integral(q.n, scaled_corners(q), exponent, tol, cache);
  v.value *= std::exp2(-static_cast<double>(q.level) * (q.n + exponent));
  return v;
}

/// (w(Q), sigma(Q), mu w(Q)) for w = |x|^theta, sigma = w^{1-p'}, d mu w = |x|^{ap} w dx.
inline MeasureTriple measure_triple(const Params& prm, const Cube& q, double tol = 1e-8,
                                    MeasureCache* cache = nullptr) {
  const WeightIntegral w = cached_power_integral(prm.theta, q, tol, cache);
  const WeightIntegral s = cached_power_integral(prm.sigma_exponent(), q, tol, cache);
  const WeightIntegral u = cached_power_integral(prm.muw_exponent(), q, tol, cache);
  MeasureTriple t;
  t.wQ = w.value;
  t.sigmaQ = s.value;
  t.muwQ = u.value;
  t.relTol = std::max({w.rel_err, s.rel_err, u.rel_err});
  t.converged = w.converged && s.converged && u.converged;
  return t;
}

// ---------------------------------------------------------------------------
// Muckenhoupt constants

enum class MuckenhouptKind { kAp, kApq, kAinfFW };

struct MuckenhouptEstimate {
  double value = 0.0;
  std::size_t argmax = 0;
  bool converged = true;
};

namespace detail {

inline double power_essinf(double e, const Box& b) {
  double near2 = 0.0, far2 = 0.0;
  for (int i = 0; i < b.n; ++i) {
    const double c = std::clamp(0.0, b.lo[i], b.hi[i]);
    near2 += c * c;
    const double f = std::max(std::abs(b.lo[i]), std::abs(b.hi[i]));
    far2 += f * f;
  }
  if (e >= 0.0) return std::pow(near2, 0.5 * e);
  return std::pow(far2, 0.5 * e);
}

/// (1/w(Q)) \int_Q M(w chi_Q) with M replaced by the dyadic maximal function
/// over a res^n sub-grid of Q.
inline double fujii_wilson_quotient(const WeightSpec& w, const Box& b, int res, double tol, bool& ok) {
  const int n = b.n;
  if (n > 2) throw std::domain_error("Fujii-Wilson estimator supports n <= 2");
  int levels = 0;
  while ((1 << levels) < res) ++levels;
  const int side = 1 << levels;
  const std::size_t cells = n == 1 ? side : static_cast<std::size_t>(side) * side;
  std::vector<double> mass(cells);
  const double hx = b.side(0) / side;
  const double hy = n == 2 ? b.side(1) / side : 1.0;
  for (std::size_t c = 0; c < cells; ++c) {
    const int ix = static_cast<int>(c % side);
    const int iy = static_cast<int>(c / side);
    Box cell{n, {}, {}};
    cell.lo[0] = b.lo[0] + ix * hx;
    cell.hi[0] = cell.lo[0] + hx;
    if (n == 2) {
      cell.lo[1] = b.lo[1] + iy * hy;
      cell.hi[1] = cell.lo[1] + hy;
    }
    const WeightIntegral v = integrate_weight(w, cell, tol);
    ok = ok && v.converged;
    mass[c] = v.value;
  }
  const double cell_vol = b.volume() / static_cast<double>(cells);
  // best[c]: sup of averages over the dyadic ancestors of cell c (itself included)
  std::vector<double> best(cells);
  for (std::size_t c = 0; c < cells; ++c) best[c] = mass[c] / cell_vol;
  std::vector<double> cur = mass;
  int cur_side = side;
  double total = 0.0;
  for (double m : mass) total += m;
  for (int lev = levels; lev > 0; --lev) {
    const int ns = cur_side / 2;
    std::vector<double> up(n == 1 ? ns : static_cast<std::size_t>(ns) * ns, 0.0);
    for (std::size_t c = 0; c < cur.size(); ++c) {
      const int ix = static_cast<int>(c % cur_side), iy = static_cast<int>(c / cur_side);
      const std::size_t pc = n == 1 ? ix / 2 : static_cast<std::size_t>(iy / 2) * ns + ix / 2;
      up[pc] += cur[c];
    }
    const int ratio = side / ns;
    const double vol = cell_vol * std::pow(static_cast<double>(ratio), n);
    for (std::size_t c = 0; c < cells; ++c) {
      const int ix = static_cast<int>(c % side) / ratio, iy = static_cast<int>(c / side) / ratio;
      const std::size_t pc = n == 1 ? ix : static_cast<std::size_t>(iy) * ns + ix;
      best[c] = std::max(best[c], up[pc] / vol);
    }
    cur = std::move(up);
    cur_side = ns;
  }
  CompensatedSum integral;
  for (std::size_t c = 0; c < cells; ++c) integral.add(best[c] * cell_vol);
  return integral.value() / total;
}

}  // namespace detail

/// Supremum of the defining quotient over a finite family of cubes.
///   Ap:     <w>_Q <w^{1-p'}>_Q^{p-1}   (p = 1: <w>_Q / essinf_Q w, power weights)
///   Apq:    <w^q>_Q <w^{-p'}>_Q^{q/p'}
///   AinfFW: Fujii-Wilson quotient, dyadic maximal function on a 64^n sub-grid.
inline MuckenhouptEstimate muckenhoupt_constant(const WeightSpec& w, double p, double q, MuckenhouptKind kind,
                                                const std::vector<Box>& family, double tol = 1e-8,
                                                int fw_resolution = 64) {
  if (family.empty()) throw std::domain_error("muckenhoupt_constant: empty cube family");
  MuckenhouptEstimate est;
  est.value = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < family.size(); ++k) {
    const Box& b = family[k];
    const double vol = b.volume();
    double quotient = 0.0;
    switch (kind) {
      case MuckenhouptKind::kAp: {
        const WeightIntegral a = integrate_weight(w, b, tol);
        est.converged = est.converged && a.converged;
        if (p == 1.0) {
          if (!w.is_power()) throw std::invalid_argument("A_1 estimate requires a power weight");
          const double inf = detail::power_essinf(w.exponent, b);
          quotient = inf > 0.0 ? (a.value / vol) / inf : std::numeric_limits<double>::infinity();
        } else {
          const WeightIntegral s = integrate_weight(w.raised(1.0 - dual_exponent(p)), b, tol);
          est.converged = est.converged && s.converged;
          quotient = (a.value / vol) * std::pow(s.value / vol, p - 1.0);
        }
        break;
      }
      case MuckenhouptKind::kApq: {
        const double pd = dual_exponent(p);
        const WeightIntegral a = integrate_weight(w.raised(q), b, tol);
        const WeightIntegral s = integrate_weight(w.raised(-pd), b, tol);
        est.converged = est.converged && a.converged && s.converged;
        quotient = (a.value / vol) * std::pow(s.value / vol, q / pd);
        break;
      }
      case MuckenhouptKind::kAinfFW: {
        bool ok = true;
        quotient = detail::fujii_wilson_quotient(w, b, fw_resolution, tol, ok);
        est.converged = est.converged && ok;
        break;
      }
    }
    if (quotient > est.value) {
      est.value = quotient;
      est.argmax = k;
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// Spherical maximal operator

struct SphericalMaximal {
  std::vector<double> values;  ///< A_t w(x) on the grid
  double sup = 0.0;
  std::size_t argmax = 0;
  bool integrable = true;
};

inline SphericalMaximal spherical_maximal(const WeightSpec& w, const Point& x, int n,
                                          const std::vector<double>& t_grid, double tol = 1e-6) {
  if (t_grid.empty()) throw std::domain_error("spherical_maximal: empty radius grid");
  const double r = norm(x, n);
  if (r == 0.0 && w.exponent < 0.0) throw std::domain_error("spherical_maximal: x = 0 with negative exponent");
  SphericalMaximal out;
  out.values.reserve(t_grid.size());
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const SphereMean m = sphere_mean(w, n, r, t_grid[k], tol);
    out.integrable = out.integrable && m.integrable;
    out.values.push_back(m.value);
    if (k == 0 || m.value > out.sup) {
      out.sup = m.value;
      out.argmax = k;
    }
  }
  return out;
}

/// K with M_S |x|^theta = K |x|^theta (homogeneity); +inf when theta > 0 or
/// theta <= 1 - n.  The sup over t is taken on a log grid refined around its
/// maximizer.
inline double spherical_maximal_constant(int n, double theta, double tol = 1e-6) {
  check_dimension(n);
  if (theta > 0.0 || theta <= 1.0 - n) return std::numeric_limits<double>::infinity();
  if (theta == 0.0) return 1.0;
  const WeightSpec w = WeightSpec::power(theta);
  std::vector<double> grid = logspace(1e-3, 1e3, 241);
  grid.push_back(1.0);
  std::sort(grid.begin(), grid.end());
  double best = 0.0, best_t = 1.0;
  for (double t : grid) {
    const double v = sphere_mean(w, n, 1.0, t, tol).value;
    if (v > best) {
      best = v;
      best_t = t;
    }
  }
  double lo = best_t / 1.06, hi = best_t * 1.06;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
    const double v1 = sphere_mean(w, n, 1.0, m1, tol).value;
    const double v2 = sphere_mean(w, n, 1.0, m2, tol).value;
    best = std::max({best, v1, v2});
    if (v1 > v2) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return best;
}

}  // namespace wib
