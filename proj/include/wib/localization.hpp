#pragma once

// Test-function dictionary, partition of unity, Poincare and
// Gagliardo-Nirenberg ratios, the Trudinger exponent probe and the local
// boundedness probe for power weights and potentials.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wib/geometry.hpp"
#include "wib/measures.hpp"
#include "wib/numeric.hpp"
#include "wib/parallel.hpp"
#include "wib/params.hpp"
#include "wib/quadrature.hpp"

namespace wib {

/// Value, gradient and Hessian of a function of n <= 4 variables.
struct Jet {
  int n = 1;
  double v = 0.0;
  std::array<double, kMaxDim> g{};
  std::array<std::array<double, kMaxDim>, kMaxDim> H{};

  static Jet constant(int n, double c) {
    Jet j;
    j.n = n;
    j.v = c;
    return j;
  }
  static Jet variable(int n, int i, double x) {
    Jet j = constant(n, x);
    j.g[i] = 1.0;
    return j;
  }

  /// f(J) given f, f', f'' at J.v.
  Jet apply(double f0, double f1, double f2) const {
    Jet r = constant(n, f0);
    for (int i = 0; i < n; ++i) {
      r.g[i] = f1 * g[i];
      for (int k = 0; k < n; ++k) r.H[i][k] = f2 * g[i] * g[k] + f1 * H[i][k];
    }
    return r;
  }
  Jet reciprocal() const {
    const double iv = 1.0 / v;
    return apply(iv, -iv * iv, 2.0 * iv * iv * iv);
  }
  Jet exp() const {
    const double e = std::exp(v);
    return apply(e, e, e);
  }

  Jet& operator+=(const Jet& o) {
    v += o.v;
    for (int i = 0; i < n; ++i) {
      g[i] += o.g[i];
      for (int k = 0; k < n; ++k) H[i][k] += o.H[i][k];
    }
    return *this;
  }
  Jet operator-() const {
    Jet r = *this;
    r.v = -v;
    for (int i = 0; i < n; ++i) {
      r.g[i] = -g[i];
      for (int k = 0; k < n; ++k) r.H[i][k] = -H[i][k];
    }
    return r;
  }
  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a += -b; }
  friend Jet operator+(Jet a, double c) {
    a.v += c;
    return a;
  }
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r = constant(a.n, a.v * b.v);
    for (int i = 0; i < a.n; ++i) {
      r.g[i] = a.g[i] * b.v + a.v * b.g[i];
      for (int k = 0; k < a.n; ++k) {
        r.H[i][k] = a.H[i][k] * b.v + a.v * b.H[i][k] + a.g[i] * b.g[k] + a.g[k] * b.g[i];
      }
    }
    return r;
  }
  friend Jet operator*(double c, Jet a) {
    a.v *= c;
    for (int i = 0; i < a.n; ++i) {
      a.g[i] *= c;
      for (int k = 0; k < a.n; ++k) a.H[i][k] *= c;
    }
    return a;
  }
  friend Jet operator/(const Jet& a, const Jet& b) { return a * b.reciprocal(); }

  double grad_norm() const {
    double s = 0;
    for (int i = 0; i < n; ++i) s += g[i] * g[i];
    return std::sqrt(s);
  }
  double hess_norm() const {
    double s = 0;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) s += H[i][k] * H[i][k];
    return std::sqrt(s);
  }
};

namespace detail {

/// exp(-1/u) for u > 0, else 0.
inline Jet flat_exp(const Jet& u) {
  if (!(u.v > 1.0 / 700.0)) return Jet::constant(u.n, 0.0);
  return (-u.reciprocal()).exp();
}

}  // namespace detail

/// Radial cutoff: 1 on |y| <= 1/2, 0 on |y| >= 1, smooth in between.
inline Jet bump(const Jet* y, int n) {
  Jet s = Jet::constant(n, 0.0);
  for (int i = 0; i < n; ++i) s += y[i] * y[i];
  if (s.v <= 0.25) return Jet::constant(n, 1.0);
  if (s.v >= 1.0) return Jet::constant(n, 0.0);
  const Jet a = detail::flat_exp(-s + 1.0);
  const Jet b = detail::flat_exp(s + (-0.25));
  return a / (a + b);
}

enum class Profile { kRadial, kEccentricA, kEccentricB, kLinear };

inline const char* profile_name(Profile p) {
  switch (p) {
    case Profile::kRadial: return "radial";
    case Profile::kEccentricA: return "eccentric_a";
    case Profile::kEccentricB: return "eccentric_b";
    case Profile::kLinear: return "linear";
  }
  return "?";
}

inline std::vector<Profile> full_dictionary() {
  return {Profile::kRadial, Profile::kEccentricA, Profile::kEccentricB, Profile::kLinear};
}

/// P((x - center) / radius) for a dictionary profile P supported in the unit ball.
struct TestFunction {
  int n = 2;
  Profile profile = Profile::kRadial;
  Point center{};
  double radius = 1.0;

  TestFunction() = default;
  TestFunction(int dim, Profile p, const Point& c, double r) : n(dim), profile(p), center(c), radius(r) {
    check_dimension(dim);
    if (!(r > 0.0)) throw std::invalid_argument("test function radius must be positive");
  }

  /// Derivatives up to order two at x, in x.
  Jet jet(const Point& x) const {
    std::array<Jet, kMaxDim> y;
    for (int i = 0; i < n; ++i) y[i] = (1.0 / radius) * Jet::variable(n, i, x[i] - center[i]);
    switch (profile) {
      case Profile::kRadial:
        return bump(y.data(), n);
      case Profile::kEccentricA: {
        std::array<Jet, kMaxDim> z = y;
        z[0] = z[0] + (-0.5);
        for (int i = 0; i < n; ++i) z[i] = 2.0 * z[i];
        return bump(z.data(), n);
      }
      case Profile::kEccentricB: {
        std::array<Jet, kMaxDim> z = y;
        const double shift = 0.4 / std::sqrt(static_cast<double>(n));
        for (int i = 0; i < n; ++i) z[i] = (1.0 / 0.55) * (z[i] + shift);
        return bump(z.data(), n);
      }
      case Profile::kLinear:
        return y[0] * bump(y.data(), n);
    }
    return Jet::constant(n, 0.0);
  }

  /// Centre and radius of the smallest ball known to contain the support.
  std::pair<Point, double> support() const {
    Point c = center;
    switch (profile) {
      case Profile::kEccentricA:
        c[0] += 0.5 * radius;
        return {c, 0.5 * radius};
      case Profile::kEccentricB:
        for (int i = 0; i < n; ++i) c[i] -= radius * 0.4 / std::sqrt(static_cast<double>(n));
        return {c, 0.55 * radius};
      default:
        return {c, radius};
    }
  }

  /// |nabla^k u(x)| (Frobenius norm of the k-th derivative tensor).  Order 3
  /// uses central differences of the Hessian with one Richardson step.
  double derivative_norm(const Point& x, int k) const {
    if (k < 0 || k > 3) throw std::invalid_argument("derivative order must be in [0, 3]");
    if (k <= 2) {
      const Jet j = jet(x);
      return k == 0 ? std::abs(j.v) : (k == 1 ? j.grad_norm() : j.hess_norm());
    }
    const double h = radius * std::ldexp(1.0, -10);
    double s = 0.0;
    for (int d = 0; d < n; ++d) {
      auto diff = [&](double step) {
        Point a = x, b = x;
        a[d] += step;
        b[d] -= step;
        const Jet ja = jet(a), jb = jet(b);
        std::array<std::array<double, kMaxDim>, kMaxDim> out{};
        for (int i = 0; i < n; ++i)
          for (int l = 0; l < n; ++l) out[i][l] = (ja.H[i][l] - jb.H[i][l]) / (2.0 * step);
        return out;
      };
      const auto d1 = diff(h), d2 = diff(0.5 * h);
      for (int i = 0; i < n; ++i) {
        for (int l = 0; l < n; ++l) {
          const double t = (4.0 * d2[i][l] - d1[i][l]) / 3.0;
          s += t * t;
        }
      }
    }
    return std::sqrt(s);
  }
};

/// Quadrature rule on S^{n-1}: trapezoid on circles, Gauss-Legendre in the
/// polar angles.
struct SphereRule {
  std::vector<Point> dirs;
  std::vector<double> weights;
};

inline SphereRule sphere_rule(int n, int level) {
  SphereRule r;
  if (n == 1) {
    Point a{}, b{};
    a[0] = 1.0;
    b[0] = -1.0;
    r.dirs = {a, b};
    r.weights = {1.0, 1.0};
    return r;
  }
  if (n == 2) {
    const int m = 32 << level;
    for (int k = 0; k < m; ++k) {
      const double t = 2.0 * std::numbers::pi * k / m;
      Point d{};
      d[0] = std::cos(t);
      d[1] = std::sin(t);
      r.dirs.push_back(d);
      r.weights.push_back(2.0 * std::numbers::pi / m);
    }
    return r;
  }
  const SphereRule inner = sphere_rule(n - 1, level);
  const GaussRule g = make_gauss_legendre(16 << level);
  const double half = 0.5 * std::numbers::pi;
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const double a = half * (g.nodes[k] + 1.0);
    const double wa = half * g.weights[k] * std::pow(std::sin(a), n - 2);
    for (std::size_t j = 0; j < inner.dirs.size(); ++j) {
      Point d{};
      d[0] = std::cos(a);
      for (int i = 1; i < n; ++i) d[i] = std::sin(a) * inner.dirs[j][i - 1];
      r.dirs.push_back(d);
      r.weights.push_back(wa * inner.weights[j]);
    }
  }
  return r;
}

/// int_{B(pole, R)} |x - pole|^e f(x) dx in polar coordinates about the pole;
/// the angular rule is refined until two levels agree.
template <class F>
WeightIntegral polar_ball_integral(F&& f, int n, const Point& pole, double R, double tol, double e = 0.0) {
  WeightIntegral out;
  double prev = std::numeric_limits<double>::quiet_NaN();
  const int max_level = n <= 2 ? 5 : 3;
  for (int level = 0; level <= max_level; ++level) {
    const SphereRule rule = sphere_rule(n, level);
    bool ok = true;
    auto radial = [&](double r, double, double) {
      CompensatedSum s;
      for (std::size_t k = 0; k < rule.dirs.size(); ++k) {
        Point x = pole;
        for (int i = 0; i < n; ++i) x[i] += r * rule.dirs[k][i];
        s.add(rule.weights[k] * f(x));
      }
      return std::pow(r, n - 1 + e) * s.value();
    };
    const QuadResult q = tanh_sinh(radial, 0.0, R, tol, 0.0, 8);
    ok = q.converged;
    out.value = q.value;
    if (ok && std::abs(q.value - prev) <= tol * std::abs(q.value)) {
      out.rel_err = std::abs(q.value - prev) / std::max(std::abs(q.value), 1e-300);
      out.converged = true;
      return out;
    }
    if (ok && q.value == 0.0 && prev == 0.0) return out;
    prev = q.value;
  }
  out.converged = false;
  return out;
}

/// (int |nabla^k u|^p |V|^p w)^{1/p} over the support of u, with
/// w = scale |x|^theta and V = |x|^v_exponent (V = 1 if not given).
inline double weighted_norm(const TestFunction& u, int k, double p, double theta, double scale = 1.0,
                            std::optional<double> v_exponent = std::nullopt, double tol = 1e-6) {
  const int n = u.n;
  const double e = theta + p * v_exponent.value_or(0.0);
  if (!(e > -n)) throw std::domain_error("integrand not locally integrable");
  // polar coordinates about the weight singularity when it is close
  const auto [sc, sr] = u.support();
  const double c = norm(sc, n);
  const bool about_origin = e != 0.0 && c <= 1.5 * sr;
  auto dens = [&u, k, p, e, about_origin](const Point& x) {
    const double d = u.derivative_norm(x, k);
    if (d == 0.0) return 0.0;
    if (about_origin || e == 0.0) return std::pow(d, p);
    return std::pow(d, p) * std::pow(norm(x, u.n), e);
  };
  const WeightIntegral wi = about_origin ? polar_ball_integral(dens, n, Point{}, c + sr, tol, e)
                                         : polar_ball_integral(dens, n, sc, sr, tol);
  if (!wi.converged) throw std::runtime_error("norm quadrature did not converge");
  return std::pow(scale * wi.value, 1.0 / p);
}

// ---------------------------------------------------------------------------
// Partition of unity

/// tau_i = eta_i / Phi with eta_i(x) = eta((x - x_i) / delta) on the lattice
/// (delta / (2 sqrt n)) Z^n, restricted to |x_i| < 2R + delta.
struct Partition {
  int n = 2;
  double R = 1.0;
  double delta = 1.0;
  double spacing = 0.0;
  double lattice_radius = 0.0;
  double phi_min = 0.0;  ///< sampled bounds of Phi on B(0, 2R)
  double phi_max = 0.0;
  int max_overlap = 0;    ///< sampled max number of eta_i > 0
  double grad_sup = 0.0;  ///< sampled sup |nabla tau_0|
  double hess_sup = 0.0;  ///< sampled sup |nabla^2 tau_0|

  template <class Visit>
  void for_nearby(const Point& x, Visit&& visit) const {
    std::array<std::int64_t, kMaxDim> lo{}, hi{}, idx{};
    for (int i = 0; i < n; ++i) {
      lo[i] = static_cast<std::int64_t>(std::ceil((x[i] - delta) / spacing));
      hi[i] = static_cast<std::int64_t>(std::floor((x[i] + delta) / spacing));
      if (lo[i] > hi[i]) return;
    }
    idx = lo;
    while (true) {
      Point c{};
      double d2 = 0.0, c2 = 0.0;
      for (int i = 0; i < n; ++i) {
        c[i] = idx[i] * spacing;
        d2 += (x[i] - c[i]) * (x[i] - c[i]);
        c2 += c[i] * c[i];
      }
      if (d2 < delta * delta && c2 < lattice_radius * lattice_radius) visit(idx, c);
      int i = 0;
      while (i < n && ++idx[i] > hi[i]) {
        idx[i] = lo[i];
        ++i;
      }
      if (i == n) break;
    }
  }

  Jet eta(const Point& c, const Point& x) const {
    return TestFunction(n, Profile::kRadial, c, delta).jet(x);
  }
  Jet phi(const Point& x) const {
    Jet s = Jet::constant(n, 0.0);
    for_nearby(x, [&](const auto&, const Point& c) { s += eta(c, x); });
    return s;
  }
  /// tau for the lattice point with integer coordinates idx.
  Jet tau(const std::array<std::int64_t, kMaxDim>& idx, const Point& x) const {
    Point c{};
    for (int i = 0; i < n; ++i) c[i] = idx[i] * spacing;
    const Jet e = eta(c, x);
    if (e.v == 0.0 && e.grad_norm() == 0.0) return Jet::constant(n, 0.0);
    return e / phi(x);
  }
  double sum_tau(const Point& x) const {
    const Jet p = phi(x);
    CompensatedSum s;
    for_nearby(x, [&](const auto&, const Point& c) { s.add(eta(c, x).v / p.v); });
    return s.value();
  }
  int overlap(const Point& x) const {
    int count = 0;
    for_nearby(x, [&](const auto&, const Point& c) {
      if (eta(c, x).v > 0.0) ++count;
    });
    return count;
  }
};

/// Builds the partition and samples Phi, the overlap count and the derivative
/// sups of tau_0.  Samples are placed on grids scaled with delta.
inline Partition build_partition_of_unity(double R, double delta, int n, int samples_per_axis = 25) {
  check_dimension(n);
  if (!(delta > 0.0 && delta <= R)) throw std::invalid_argument("partition needs 0 < delta <= R");
  if (samples_per_axis < 2) throw std::invalid_argument("need at least two samples per axis");
  Partition part;
  part.n = n;
  part.R = R;
  part.delta = delta;
  part.spacing = delta / (2.0 * std::sqrt(static_cast<double>(n)));
  part.lattice_radius = 2.0 * R + delta;
  part.phi_min = std::numeric_limits<double>::infinity();
  // derivative sups over the support of tau_0, on a grid in units of delta
  std::array<int, kMaxDim> idx{};
  const std::array<std::int64_t, kMaxDim> zero{};
  while (true) {
    Point x{};
    for (int i = 0; i < n; ++i) x[i] = delta * (-1.0 + 2.0 * idx[i] / (samples_per_axis - 1));
    const Jet t = part.tau(zero, x);
    part.grad_sup = std::max(part.grad_sup, t.grad_norm());
    part.hess_sup = std::max(part.hess_sup, t.hess_norm());
    const Jet p = part.phi(x);
    part.phi_min = std::min(part.phi_min, p.v);
    part.phi_max = std::max(part.phi_max, p.v);
    part.max_overlap = std::max(part.max_overlap, part.overlap(x));
    int i = 0;
    while (i < n && ++idx[i] == samples_per_axis) {
      idx[i] = 0;
      ++i;
    }
    if (i == n) break;
  }
  // Phi along rays out to 2R
  for (int k = 0; k <= 64; ++k) {
    for (int d = 0; d < n; ++d) {
      Point x{};
      x[d] = 2.0 * R * k / 64.0;
      const double v = part.phi(x).v;
      part.phi_min = std::min(part.phi_min, v);
      part.phi_max = std::max(part.phi_max, v);
    }
  }
  return part;
}

// ---------------------------------------------------------------------------
// Ratios

/// ||u||_{L^p(B, w)} / (delta^m ||nabla^m u||_{L^p(B, M_S w)}); M_S w = K |x|^theta
/// with K the spherical maximal constant of |x|^theta.
inline double poincare_ratio(const TestFunction& u, const Point& x0, double delta, const Params& prm,
                             double tol = 1e-6) {
  prm.validate_localization();
  if (u.n != prm.n) throw std::invalid_argument("dimension mismatch");
  double off = 0.0;
  for (int i = 0; i < prm.n; ++i) off += (u.center[i] - x0[i]) * (u.center[i] - x0[i]);
  if (std::sqrt(off) + u.radius > delta * (1.0 + 1e-12)) throw std::invalid_argument("test function not supported in the ball");
  const double K = spherical_maximal_constant(prm.n, prm.theta);
  const double num = weighted_norm(u, 0, prm.p, prm.theta, 1.0, std::nullopt, tol);
  const double den = weighted_norm(u, prm.m, prm.p, prm.theta, K, std::nullopt, tol);
  if (!(num > 0.0) || !(den > 0.0)) throw std::domain_error("vanishing test function");
  return num / (std::pow(delta, prm.m) * den);
}

/// ||nabla^k u|| / (||nabla^m u||^{k/m} ||u||^{1-k/m}) in L^p(w).
inline double gagliardo_nirenberg_ratio(const TestFunction& u, int k, int m, const Params& prm, double tol = 1e-6) {
  if (k < 0 || k > m || m < 1) throw std::invalid_argument("need 0 <= k <= m, m >= 1");
  if (u.n != prm.n) throw std::invalid_argument("dimension mismatch");
  if (k == 0 || k == m) return 1.0;
  const double top = weighted_norm(u, k, prm.p, prm.theta, 1.0, std::nullopt, tol);
  const double hi = weighted_norm(u, m, prm.p, prm.theta, 1.0, std::nullopt, tol);
  const double lo = weighted_norm(u, 0, prm.p, prm.theta, 1.0, std::nullopt, tol);
  if (!(hi > 0.0) || !(lo > 0.0)) throw std::domain_error("vanishing test function");
  const double s = static_cast<double>(k) / m;
  return top / (std::pow(hi, s) * std::pow(lo, 1.0 - s));
}

// ---------------------------------------------------------------------------
// Probes

/// sup over the dictionary, rescaled to B(x0, delta), of ||V phi||_{L^p(w)} / ||nabla^m phi||_{L^p(w)}.
inline double dictionary_sup(const Params& prm, std::optional<double> v_exponent, const Point& x0, double delta,
                             const std::vector<Profile>& dict, double tol = 1e-6) {
  if (!v_exponent) return 0.0;
  double best = 0.0;
  for (Profile pr : dict) {
    const TestFunction u(prm.n, pr, x0, delta);
    const double num = weighted_norm(u, 0, prm.p, prm.theta, 1.0, v_exponent, tol);
    const double den = weighted_norm(u, prm.m, prm.p, prm.theta, 1.0, std::nullopt, tol);
    best = std::max(best, num / den);
  }
  return best;
}

struct BoundednessTable {
  std::vector<double> deltas;
  std::vector<Point> centers;
  std::vector<std::vector<double>> value;  ///< [delta][centre], lower bounds for the sup in the localized condition
  std::vector<double> sup_over_centers;
};

inline BoundednessTable local_boundedness_probe(const Params& prm, std::optional<double> v_exponent,
                                                const std::vector<double>& deltas, const std::vector<Point>& centers,
                                                const std::vector<Profile>& dict = full_dictionary(), int workers = 1,
                                                double tol = 1e-6) {
  prm.validate_localization();
  if (deltas.empty() || centers.empty() || dict.empty()) throw std::invalid_argument("probe needs non-empty schedules");
  BoundednessTable t;
  t.deltas = deltas;
  t.centers = centers;
  t.value.assign(deltas.size(), std::vector<double>(centers.size(), 0.0));
  parallel_for(deltas.size() * centers.size(), workers, [&](std::size_t k) {
    const std::size_t i = k / centers.size(), j = k % centers.size();
    if (!(deltas[i] > 0.0)) throw std::invalid_argument("delta values must be positive");
    t.value[i][j] = dictionary_sup(prm, v_exponent, centers[j], deltas[i], dict, tol);
  });
  for (const auto& row : t.value) t.sup_over_centers.push_back(*std::max_element(row.begin(), row.end()));
  return t;
}

struct TrudingerRow {
  double beta = 0.0;
  double exponent = 0.0;  ///< pm / (beta + 1)
  double slope = 0.0;     ///< log(ratio / delta^exponent) against log delta
  bool holds = false;
};

struct TrudingerResult {
  std::vector<double> deltas;
  std::vector<double> ratio;  ///< sup_phi ||V phi||^p / ||nabla^m phi||^p, phi centred at 0
  SlopeFit ratio_fit;         ///< delta-exponent of the ratio
  std::vector<TrudingerRow> rows;
  double minimal_beta = std::numeric_limits<double>::quiet_NaN();
  bool found = false;
};

/// The bound ratio <= C delta^{pm/(beta+1)} is taken to hold when the quotient
/// does not grow as delta decreases (fitted slope >= -slack).
inline TrudingerResult trudinger_probe(const Params& prm, const std::vector<double>& beta_grid,
                                       const std::vector<double>& deltas, double slack = 0.02,
                                       const std::vector<Profile>& dict = full_dictionary(), int workers = 1) {
  prm.validate_localization();
  if (!(prm.p > 1.0)) throw ParamError("Trudinger probe requires p > 1");
  if (!(prm.a > -prm.m && prm.a <= 0.0)) throw ParamError("Trudinger probe requires -m < a <= 0");
  if (beta_grid.empty() || deltas.size() < 2) throw std::invalid_argument("need a beta grid and at least two deltas");
  TrudingerResult res;
  res.deltas = deltas;
  res.ratio.assign(deltas.size(), 0.0);
  parallel_for(deltas.size(), workers, [&](std::size_t k) {
    res.ratio[k] = std::pow(dictionary_sup(prm, prm.a, Point{}, deltas[k], dict), prm.p);
  });
  res.ratio_fit = fit_loglog(deltas, res.ratio);
  std::vector<double> sorted = beta_grid;
  std::sort(sorted.begin(), sorted.end());
  for (double b : sorted) {
    if (!(b > 0.0)) throw std::invalid_argument("beta values must be positive");
    TrudingerRow row;
    row.beta = b;
    row.exponent = prm.p * prm.m / (b + 1.0);
    std::vector<double> q;
    for (std::size_t k = 0; k < deltas.size(); ++k) q.push_back(res.ratio[k] / std::pow(deltas[k], row.exponent));
    row.slope = fit_loglog(deltas, q).slope;
    row.holds = row.slope >= -slack;
    if (row.holds && !res.found) {
      res.found = true;
      res.minimal_beta = b;
    }
    res.rows.push_back(row);
  }
  return res;
}

}  // namespace wib
