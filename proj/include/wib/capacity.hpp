#pragma once

// Weighted Riesz capacity: the ball formula, a discrete variational solver,
// the ball restricted k2 table and the capacity growth check.  The solver
// applies the kernel by FFT convolution and needs FFTW3.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "wib/fftw_lock.hpp"
#include "wib/geometry.hpp"
#include "wib/measures.hpp"
#include "wib/numeric.hpp"
#include "wib/parallel.hpp"
#include "wib/params.hpp"
#include "wib/quadrature.hpp"

namespace wib {

/// (int_delta^inf sigma(B(x0, t)) t^{-(n-alpha)p' - 1} dt)^{1-p}.
inline double ball_capacity_formula(const Point& center, double delta, const Params& prm, double tol = 1e-8) {
  prm.validate_capacity();
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const int n = prm.n;
  const double pd = prm.p_dual();
  const double es = prm.sigma_exponent();
  const double power = (n - prm.alpha) * pd + 1.0;
  const double growth = n + es - power + 1.0;  // sigma(B(x0,t)) t^{-power} ~ t^{growth - 1}
  if (!(growth < 0.0)) throw std::domain_error("capacity tail integral diverges");
  if (!(es > -n)) throw std::domain_error("dual weight not locally integrable");
  const double c = norm(center, n);
  const double area = unit_sphere_area(n) / (n + es);
  if (c == 0.0) {
    const double tail = area * std::pow(delta, growth) / (-growth);
    return std::pow(tail, 1.0 - prm.p);
  }
  const WeightSpec sigma = WeightSpec::power(es);
  const double far = 1e6 * std::max(c, delta);
  bool ok = true;
  // t = delta / s maps [delta, inf) onto (0, 1]
  auto integrand = [&](double s, double, double) {
    if (s <= 0.0) return 0.0;
    const double t = delta / s;
    if (t > far) {
      const double lt = std::log(delta) - std::log(s);
      return area * std::exp((n + es - power) * lt + std::log(delta) - 2.0 * std::log(s));
    }
    const WeightIntegral wi = integrate_weight(sigma, Ball(n, center, t), std::max(tol, 1e-10));
    ok = ok && wi.converged;
    return wi.value * std::pow(t, -power) * delta / (s * s);
  };
  const QuadResult q = tanh_sinh(integrand, 0.0, 1.0, tol);
  if (!ok || !q.converged) throw std::runtime_error("capacity tail quadrature did not converge");
  return std::pow(q.value, 1.0 - prm.p);
}

// ---------------------------------------------------------------------------
// Variational solver

/// A uniform cell grid of `cells` per axis on the cube of half-width `half_width`.
struct CapacityGrid {
  int n = 2;
  Point center{};
  double half_width = 1.0;
  int cells = 32;

  double h() const { return 2.0 * half_width / cells; }
  std::size_t count() const {
    std::size_t c = 1;
    for (int i = 0; i < n; ++i) c *= static_cast<std::size_t>(cells);
    return c;
  }
  Point cell_center(const std::array<int, kMaxDim>& idx) const {
    Point x{};
    for (int i = 0; i < n; ++i) x[i] = center[i] - half_width + (idx[i] + 0.5) * h();
    return x;
  }
  std::array<int, kMaxDim> unravel(std::size_t f) const {
    std::array<int, kMaxDim> idx{};
    for (int i = n - 1; i >= 0; --i) {
      idx[i] = static_cast<int>(f % cells);
      f /= cells;
    }
    return idx;
  }
  std::size_t ravel(const std::array<int, kMaxDim>& idx) const {
    std::size_t f = 0;
    for (int i = 0; i < n; ++i) f = f * cells + idx[i];
    return f;
  }
  Box cell_box(std::size_t f) const {
    const auto idx = unravel(f);
    Box b;
    b.n = n;
    for (int i = 0; i < n; ++i) {
      b.lo[i] = center[i] - half_width + idx[i] * h();
      b.hi[i] = b.lo[i] + h();
    }
    return b;
  }
};

/// Constraint points of E; each must be a cell centre of the grid.
struct ConstraintSet {
  std::vector<Point> points;
  double radius = 0.0;  ///< radius of the ball the points sample, 0 if not a ball
  Point center{};
};

/// Cell centres of the grid lying in the closed ball B(c, r).
inline ConstraintSet ball_constraints(const CapacityGrid& g, const Point& c, double r) {
  ConstraintSet e;
  e.radius = r;
  e.center = c;
  for (std::size_t f = 0; f < g.count(); ++f) {
    const Point x = g.cell_center(g.unravel(f));
    double d2 = 0.0;
    for (int i = 0; i < g.n; ++i) d2 += (x[i] - c[i]) * (x[i] - c[i]);
    if (d2 <= r * r * (1.0 + 1e-12)) e.points.push_back(x);
  }
  return e;
}

struct CapacityEstimate {
  double formulaValue = std::numeric_limits<double>::quiet_NaN();
  double variationalValue = 0.0;  ///< energy of the feasible rescaled primal
  double lowerBound = 0.0;        ///< dual objective
  double feasibilityGap = 0.0;    ///< min_j (K f)_j - 1 of the returned f
  double rawGap = 0.0;            ///< the same before rescaling
  double scalingSlope = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = true;
  std::vector<double> density;    ///< f per cell
};

struct SolverOptions {
  int iter_budget = 5000;
  double gap_tol = 1e-4;  ///< relative primal-dual gap
  double step = 1.0;      ///< multiplicative step in units of p - 1
  double tol = 1e-8;      ///< quadrature tolerance for the kernel table
};

namespace detail {

/// Cross-correlation with a symmetric kernel table by zero-padded FFT.
class GridConvolver {
 public:
  GridConvolver(int n, int cells, const std::vector<double>& kernel_table) : n_(n), cells_(cells) {
    size_ = 2 * cells;
    total_ = 1;
    for (int i = 0; i < n; ++i) total_ *= static_cast<std::size_t>(size_);
    half_ = total_ / size_ * (size_ / 2 + 1);
    real_ = fftw_alloc_real(total_);
    spec_ = fftw_alloc_complex(half_);
    kspec_ = fftw_alloc_complex(half_);
    std::vector<int> dims(n, size_);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd_ = fftw_plan_dft_r2c(n, dims.data(), real_, spec_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r(n, dims.data(), spec_, real_, FFTW_ESTIMATE);
    // kernel_table is indexed by offsets in [-(cells-1), cells-1]^n
    const int span = 2 * cells - 1;
    std::fill(real_, real_ + total_, 0.0);
    std::size_t count = 1;
    for (int i = 0; i < n; ++i) count *= static_cast<std::size_t>(span);
    for (std::size_t k = 0; k < count; ++k) {
      std::size_t rem = k, pos = 0;
      for (int i = n - 1, stride = 1; i >= 0; --i) {
        const int d = static_cast<int>(rem % span) - (cells - 1);
        rem /= span;
        pos += static_cast<std::size_t>((d + size_) % size_) * stride;
        stride *= size_;
      }
      real_[pos] = kernel_table[k];
    }
    fftw_execute(fwd_);
    for (std::size_t k = 0; k < half_; ++k) {
      kspec_[k][0] = spec_[k][0];
      kspec_[k][1] = spec_[k][1];
    }
  }
  GridConvolver(const GridConvolver&) = delete;
  GridConvolver& operator=(const GridConvolver&) = delete;
  ~GridConvolver() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(spec_);
    fftw_free(kspec_);
  }

  /// out_j = sum_i K(j - i) in_i for grid arrays in row-major order.
  void apply(const std::vector<double>& in, std::vector<double>& out) {
    std::fill(real_, real_ + total_, 0.0);
    const std::size_t cells_total = in.size();
    for (std::size_t f = 0; f < cells_total; ++f) real_[pad(f)] = in[f];
    fftw_execute(fwd_);
    for (std::size_t k = 0; k < half_; ++k) {
      const double re = spec_[k][0] * kspec_[k][0] - spec_[k][1] * kspec_[k][1];
      const double im = spec_[k][0] * kspec_[k][1] + spec_[k][1] * kspec_[k][0];
      spec_[k][0] = re;
      spec_[k][1] = im;
    }
    fftw_execute(bwd_);
    out.resize(cells_total);
    const double scale = 1.0 / static_cast<double>(total_);
    for (std::size_t f = 0; f < cells_total; ++f) out[f] = real_[pad(f)] * scale;
  }

 private:
  std::size_t pad(std::size_t f) const {
    std::size_t pos = 0, stride = 1;
    for (int i = n_ - 1; i >= 0; --i) {
      pos += (f % cells_) * stride;
      f /= cells_;
      stride *= size_;
    }
    return pos;
  }

  int n_, cells_, size_;
  std::size_t total_, half_;
  double* real_;
  fftw_complex* spec_;
  fftw_complex* kspec_;
  fftw_plan fwd_, bwd_;
};

/// K(d) = int over the unit cell centred at d of |y|^{alpha - n}, for d in [-(N-1), N-1]^n.
inline std::vector<double> riesz_cell_table(int n, double alpha, int cells, double tol) {
  const int span = 2 * cells - 1;
  std::size_t count = 1;
  for (int i = 0; i < n; ++i) count *= static_cast<std::size_t>(span);
  std::vector<double> table(count);
  // by symmetry the value depends on the sorted absolute offsets only
  std::map<std::array<int, kMaxDim>, double> seen;
  const WeightSpec kern = WeightSpec::power(alpha - n);
  for (std::size_t k = 0; k < count; ++k) {
    std::array<int, kMaxDim> key{};
    std::size_t rem = k;
    for (int i = n - 1; i >= 0; --i) {
      key[i] = std::abs(static_cast<int>(rem % span) - (cells - 1));
      rem /= span;
    }
    std::sort(key.begin(), key.begin() + n);
    auto it = seen.find(key);
    if (it == seen.end()) {
      Box b;
      b.n = n;
      for (int i = 0; i < n; ++i) {
        b.lo[i] = key[i] - 0.5;
        b.hi[i] = key[i] + 0.5;
      }
      const WeightIntegral wi = integrate_weight(kern, b, tol);
      if (!wi.converged) throw std::runtime_error("kernel cell integral did not converge");
      it = seen.emplace(key, wi.value).first;
    }
    table[k] = it->second;
  }
  return table;
}

}  // namespace detail

/// Minimizes sum_i f_i^p w(cell_i) subject to (K f)_j >= 1 on E, f >= 0, where
/// (K f)_j = sum_i f_i int_{cell_i} |x_j - y|^{alpha - n} dy.  Multiplicative
/// updates of the constraint multipliers with primal recovery
/// f_i = ((K^T lambda)_i / (p w_i))^{1/(p-1)}.
inline CapacityEstimate variational_capacity(const ConstraintSet& e, const CapacityGrid& grid, const Params& prm,
                                             const SolverOptions& opt = {}) {
  prm.validate_capacity();
  if (grid.n != prm.n) throw std::invalid_argument("grid dimension mismatch");
  if (grid.cells < 2 || grid.cells > 256) throw std::invalid_argument("cells per axis must be in [2, 256]");
  if (opt.iter_budget < 1) throw std::invalid_argument("iteration budget must be positive");
  const int n = prm.n;
  const double p = prm.p;
  const double h = grid.h();
  CapacityEstimate est;
  const std::size_t cells = grid.count();
  est.density.assign(cells, 0.0);
  if (e.points.empty()) {
    est.feasibilityGap = std::numeric_limits<double>::infinity();
    est.rawGap = est.feasibilityGap;
    return est;
  }
  std::vector<std::size_t> where;
  for (const Point& x : e.points) {
    std::array<int, kMaxDim> idx{};
    for (int i = 0; i < n; ++i) {
      const double u = (x[i] - grid.center[i] + grid.half_width) / h - 0.5;
      idx[i] = static_cast<int>(std::lround(u));
      if (std::abs(u - idx[i]) > 1e-6) throw std::invalid_argument("constraint point is not a cell centre");
      if (idx[i] < 1 || idx[i] >= grid.cells - 1) throw std::invalid_argument("constraint point outside the grid interior");
    }
    where.push_back(grid.ravel(idx));
  }
  std::sort(where.begin(), where.end());
  where.erase(std::unique(where.begin(), where.end()), where.end());

  std::vector<double> weight(cells);
  const WeightSpec w = WeightSpec::power(prm.theta);
  for (std::size_t f = 0; f < cells; ++f) {
    if (prm.theta == 0.0) {
      weight[f] = std::pow(h, n);
    } else {
      const WeightIntegral wi = integrate_weight(w, grid.cell_box(f), opt.tol);
      if (!wi.converged) est.converged = false;
      weight[f] = wi.value;
    }
  }
  std::vector<double> table = detail::riesz_cell_table(n, prm.alpha, grid.cells, opt.tol);
  const double scale = std::pow(h, prm.alpha);
  for (double& v : table) v *= scale;
  detail::GridConvolver conv(n, grid.cells, table);

  const double q = 1.0 / (p - 1.0);
  std::vector<double> lambda(cells, 0.0), b, kf, f(cells, 0.0);
  for (std::size_t j : where) lambda[j] = 1.0;
  double primal = std::numeric_limits<double>::infinity(), dual = 0.0, raw = 0.0;
  std::vector<double> best_f;
  double best_min = 0.0;
  auto recover = [&]() {
    conv.apply(lambda, b);
    for (std::size_t i = 0; i < cells; ++i) f[i] = std::pow(std::max(b[i], 0.0) / (p * weight[i]), q);
    conv.apply(f, kf);
  };
  int it = 0;
  for (; it < opt.iter_budget; ++it) {
    recover();
    double mn = std::numeric_limits<double>::infinity();
    CompensatedSum energy, mass;
    for (std::size_t j : where) {
      mn = std::min(mn, kf[j]);
      mass.add(lambda[j]);
    }
    for (std::size_t i = 0; i < cells; ++i) energy.add(weight[i] * std::pow(f[i], p));
    // f / mn is feasible; the best rescaled lambda gives the dual bound
    const double cand = energy.value() / std::pow(mn, p);
    if (cand < primal) {
      primal = cand;
      best_f = f;
      best_min = mn;
      raw = mn - 1.0;
    }
    const double s = std::pow(mass.value() / (p * energy.value()), p - 1.0);
    dual = std::max(dual, s * mass.value() - (p - 1.0) * std::pow(s, p / (p - 1.0)) * energy.value());
    if (primal - dual <= opt.gap_tol * primal) break;
    for (std::size_t j : where) lambda[j] *= std::pow(kf[j], -opt.step * (p - 1.0));
  }
  est.iterations = it;
  est.variationalValue = primal;
  est.lowerBound = dual;
  est.rawGap = raw;
  for (std::size_t i = 0; i < cells; ++i) est.density[i] = best_f[i] / best_min;
  conv.apply(est.density, kf);
  double mn = std::numeric_limits<double>::infinity();
  for (std::size_t j : where) mn = std::min(mn, kf[j]);
  est.feasibilityGap = mn - 1.0;
  if (!(primal - dual <= opt.gap_tol * primal) || est.feasibilityGap < -1e-3) est.converged = false;
  if (e.radius > 0.0) est.formulaValue = ball_capacity_formula(e.center, e.radius, prm);
  return est;
}

/// Variational and formula capacities of the balls B(center, delta) on grids of
/// half-width 2 delta, with fitted delta-slopes.
struct CapacitySchedule {
  std::vector<double> deltas;
  std::vector<CapacityEstimate> estimates;
  SlopeFit formula_slope;
  SlopeFit variational_slope;
  bool converged = true;
};

inline CapacitySchedule capacity_schedule(const std::vector<double>& deltas, const Point& center, const Params& prm,
                                          int cells = 32, const SolverOptions& opt = {}, int workers = 1) {
  if (deltas.empty()) throw std::invalid_argument("empty delta schedule");
  CapacitySchedule out;
  out.deltas = deltas;
  out.estimates.resize(deltas.size());
  parallel_for(deltas.size(), workers, [&](std::size_t k) {
    CapacityGrid g;
    g.n = prm.n;
    g.center = center;
    g.half_width = 2.0 * deltas[k];
    g.cells = cells;
    out.estimates[k] = variational_capacity(ball_constraints(g, center, deltas[k]), g, prm, opt);
  });
  std::vector<double> fv, vv;
  for (const auto& e : out.estimates) {
    fv.push_back(e.formulaValue);
    vv.push_back(e.variationalValue);
    out.converged = out.converged && e.converged;
  }
  if (deltas.size() >= 2) {
    out.formula_slope = fit_loglog(deltas, fv);
    out.variational_slope = fit_loglog(deltas, vv);
    for (auto& e : out.estimates) e.scalingSlope = out.variational_slope.slope;
  }
  return out;
}

// ---------------------------------------------------------------------------
// k2 restricted to balls

struct K2Row {
  double delta = 0.0;
  std::vector<double> ratio;  ///< per centre: mu w(B) / formula capacity(B), B = B(c, delta / 2)
  double sup = 0.0;
  std::size_t argmax = 0;
};

struct K2Table {
  std::vector<K2Row> rows;
  SlopeFit slope;  ///< log sup against log delta
  bool lower_bound = true;  ///< balls only: the table bounds k2 from below
};

inline K2Table capacity_ratio_k2(const std::vector<double>& deltas, const Params& prm, const std::vector<Point>& centers,
                                 double tol = 1e-8, int workers = 1) {
  prm.validate_capacity();
  if (deltas.empty() || centers.empty()) throw std::invalid_argument("k2 needs non-empty delta and centre lists");
  const int n = prm.n;
  const WeightSpec muw = WeightSpec::potential_density(prm.a, prm.theta, prm.p);
  if (!(muw.exponent > -n)) throw std::domain_error("mu w not locally integrable");
  K2Table table;
  table.rows.resize(deltas.size());
  parallel_for(deltas.size(), workers, [&](std::size_t k) {
    K2Row& row = table.rows[k];
    row.delta = deltas[k];
    if (!(row.delta > 0.0)) throw std::invalid_argument("delta values must be positive");
    const double r = 0.5 * row.delta;
    for (const Point& c : centers) {
      const double mass = norm(c, n) == 0.0 ? centered_ball_power_integral(n, muw.exponent, r)
                                            : integrate_weight(muw, Ball(n, c, r), tol).value;
      row.ratio.push_back(mass / ball_capacity_formula(c, r, prm, tol));
    }
    row.argmax = static_cast<std::size_t>(std::max_element(row.ratio.begin(), row.ratio.end()) - row.ratio.begin());
    row.sup = row.ratio[row.argmax];
  });
  if (deltas.size() >= 2) {
    std::vector<double> s;
    for (const auto& row : table.rows) s.push_back(row.sup);
    table.slope = fit_loglog(deltas, s);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Capacity growth condition v(E) <~ R(E)^{q/p}

/// 1/p - 1/q = m / ((beta + 1)(n + theta)).
inline double corollary16_q(const Params& prm) {
  const double gap = prm.m / ((prm.beta + 1.0) * (prm.n + prm.theta));
  const double inv = 1.0 / prm.p - gap;
  if (!(prm.p > 1.0) || !(inv > 0.0)) throw std::domain_error("exponent relation has no admissible q");
  return 1.0 / inv;
}

struct Cor16Report {
  double q = 0.0;
  std::vector<double> radii;
  std::vector<double> v;         ///< v(B(0, r)) with dv = |V|^q w dx
  std::vector<double> capacity;  ///< formula capacity with alpha = m
  std::vector<double> ratio;     ///< v / capacity^{q/p}
  double sup = 0.0;
  std::size_t argmax = 0;
  bool interior = true;  ///< sup attained away from the schedule ends
  double slope = std::numeric_limits<double>::quiet_NaN();  ///< log v against log cap^{q/p}, small radii
  bool pass = true;
};

/// V = |x|^{v_exponent}, or V = 0 when no exponent is given.  Balls are centred.
inline Cor16Report check_corollary16(const Params& prm, std::optional<double> v_exponent,
                                     const std::vector<double>& radii) {
  prm.validate_localization();
  if (radii.size() < 2) throw std::invalid_argument("need at least two radii");
  if (!(prm.p < (prm.beta + 1.0) * (prm.n + prm.theta) / prm.m)) {
    throw std::domain_error("p must be below (beta + 1)(n + theta) / m");
  }
  Params cap = prm;
  cap.alpha = prm.m;
  Cor16Report rep;
  rep.q = corollary16_q(prm);
  rep.radii = radii;
  const int n = prm.n;
  for (double r : radii) {
    double vol = 0.0;
    if (v_exponent) {
      const double e = *v_exponent * rep.q + prm.theta;
      if (!(e > -n)) throw std::domain_error("|V|^q w not locally integrable");
      vol = centered_ball_power_integral(n, e, r);
    }
    const double c = ball_capacity_formula(Point{}, r, cap);
    rep.v.push_back(vol);
    rep.capacity.push_back(c);
    rep.ratio.push_back(vol / std::pow(c, rep.q / prm.p));
  }
  rep.argmax = static_cast<std::size_t>(std::max_element(rep.ratio.begin(), rep.ratio.end()) - rep.ratio.begin());
  rep.sup = rep.ratio[rep.argmax];
  if (rep.sup == 0.0) {
    rep.pass = true;
    return rep;
  }
  const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
  const auto lo_i = static_cast<std::size_t>(lo - radii.begin());
  const auto hi_i = static_cast<std::size_t>(hi - radii.begin());
  rep.interior = rep.argmax != lo_i && rep.argmax != hi_i;
  std::vector<std::size_t> order(radii.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return radii[x] < radii[y]; });
  const std::size_t half = std::max<std::size_t>(2, (order.size() + 1) / 2);
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < half; ++k) {
    lx.push_back(std::pow(rep.capacity[order[k]], rep.q / prm.p));
    ly.push_back(rep.v[order[k]]);
  }
  rep.slope = fit_loglog(lx, ly).slope;
  rep.pass = rep.slope >= 1.0 - 0.05;
  return rep;
}

}  // namespace wib
