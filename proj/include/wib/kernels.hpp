#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "wib/geometry.hpp"
#include "wib/measures.hpp"
#include "wib/numeric.hpp"

namespace wib {

inline double riesz_kernel(int n, double alpha, const Point& x) {
  const double r = norm(x, n);
  if (r == 0.0) throw std::domain_error("riesz_kernel: pole at x = 0");
  return std::pow(r, alpha - n);
}

struct KernelValue {
  double value = 0.0;
  bool underflow = false;
  bool converged = true;
};

namespace detail {

/// (4 pi)^{-n/2} / Gamma(alpha/2) \int_0^inf e^{-s} s^{alpha/2} (s+tau)^{-n/2}
///   exp(-r^2 / (4 (s+tau))) ds/s,
/// i.e. the Bessel kernel convolved with the heat kernel at time tau
/// (tau = 0 gives G_alpha).  Trapezoid rule in u = log s, halving the step
/// from 200 nodes until two estimates agree.
inline KernelValue bessel_subordination(int n, double alpha, double r, double tau, double tol) {
  KernelValue out;
  auto phi = [&](double u) {
    const double s = std::exp(u);
    const double st = s + tau;
    return -s - r * r / (4.0 * st) + 0.5 * alpha * u - 0.5 * n * std::log(st);
  };
  const double kappa = 0.5 * (alpha - n);
  double u_peak;
  if (r > 0.0) {
    const double root = std::sqrt(kappa * kappa + r * r);
    u_peak = kappa < 0.0 ? std::log(0.5 * r * r / (root - kappa)) : std::log(0.5 * (kappa + root));
  } else {
    u_peak = std::log(std::max(0.5 * alpha, 1e-3));
  }
  // Refine the peak of phi (tau shifts it slightly).
  double peak = phi(u_peak);
  for (double step = 1.0; step > 1e-3; step *= 0.5) {
    for (int dir : {-1, 1}) {
      while (phi(u_peak + dir * step) > peak) {
        u_peak += dir * step;
        peak = phi(u_peak);
      }
    }
  }
  constexpr double kDrop = 60.0;
  double lo = u_peak, hi = u_peak;
  for (double step = 0.25; phi(lo) > peak - kDrop; step *= 1.25) {
    lo -= step;
    if (lo < u_peak - 2000.0) break;
  }
  for (double step = 0.25; phi(hi) > peak - kDrop; step *= 1.25) hi += step;

  const double log_c = -0.5 * n * std::log(4.0 * std::numbers::pi) - std::lgamma(0.5 * alpha);
  int nodes = 200;
  double h = (hi - lo) / nodes;
  CompensatedSum sum;
  for (int k = 0; k <= nodes; ++k) sum.add(std::exp(phi(lo + k * h) - peak));
  double estimate = h * sum.value();
  out.converged = false;
  for (int level = 0; level < 12; ++level) {
    CompensatedSum fresh;
    for (int k = 0; k < nodes; ++k) fresh.add(std::exp(phi(lo + (k + 0.5) * h) - peak));
    sum.add(fresh.value());
    nodes *= 2;
    h *= 0.5;
    const double next = h * sum.value();
    const double diff = std::abs(next - estimate);
    estimate = next;
    if (diff <= tol * std::abs(next)) {
      out.converged = true;
      break;
    }
  }
  const double log_value = log_c + peak + std::log(estimate);
  if (log_value < -745.0) {
    out.underflow = true;
    out.value = 0.0;
    return out;
  }
  out.value = std::exp(log_value);
  return out;
}

}  // namespace detail

/// G_alpha(x) for lambda = 1, Fourier convention g^(xi) = (2 pi)^{-n/2} \int g e^{-i x xi}.
inline KernelValue bessel_kernel_unit(int n, double alpha, const Point& x, double tol = 1e-10) {
  check_dimension(n);
  if (!(alpha > 0.0)) throw std::invalid_argument("bessel_kernel: alpha must be positive");
  if (tol < 1e-10) throw std::invalid_argument("bessel_kernel: tol must be >= 1e-10");
  const double r = norm(x, n);
  if (r == 0.0) throw std::domain_error("bessel_kernel: pole at x = 0");
  if (r > 700.0) return {0.0, true, true};
  return detail::bessel_subordination(n, alpha, r, 0.0, tol);
}

/// G_{alpha,lambda}(x) = lambda^{n-alpha} G_alpha(lambda x).
inline KernelValue bessel_kernel(int n, double alpha, double lambda, const Point& x, double tol = 1e-10) {
  if (!(lambda > 0.0)) throw std::invalid_argument("bessel_kernel: lambda must be positive");
  Point y{};
  for (int i = 0; i < n; ++i) y[i] = lambda * x[i];
  KernelValue v = bessel_kernel_unit(n, alpha, y, tol);
  v.value *= std::pow(lambda, n - alpha);
  return v;
}

/// Bessel kernel smoothed by the heat kernel at time tau, as a function of |x|.
inline KernelValue smoothed_bessel_kernel(int n, double alpha, double tau, double r, double tol = 1e-10) {
  if (!(tau >= 0.0)) throw std::invalid_argument("smoothed_bessel_kernel: tau must be >= 0");
  return detail::bessel_subordination(n, alpha, r, tau, tol);
}

// ---------------------------------------------------------------------------
// Grid functions, truncated Riesz potential, local fractional maximal operator

/// Piecewise constant function on a uniform grid of cubic cells; zero outside.
struct GridFunction {
  int n = 2;
  Point lower{};
  double h = 1.0;
  std::array<int, kMaxDim> dims{};
  std::vector<double> values;  ///< first axis fastest

  std::size_t cell_count() const {
    std::size_t c = 1;
    for (int i = 0; i < n; ++i) c *= static_cast<std::size_t>(dims[i]);
    return c;
  }
  std::array<int, kMaxDim> unravel(std::size_t k) const {
    std::array<int, kMaxDim> idx{};
    for (int i = 0; i < n; ++i) {
      idx[i] = static_cast<int>(k % dims[i]);
      k /= dims[i];
    }
    return idx;
  }
  Box cell_box(std::size_t k) const {
    const auto idx = unravel(k);
    Box b{n, {}, {}};
    for (int i = 0; i < n; ++i) {
      b.lo[i] = lower[i] + idx[i] * h;
      b.hi[i] = b.lo[i] + h;
    }
    return b;
  }

  /// Sampled at cell centers.
  template <class F>
  static GridFunction sample(int n, const Point& lower, double h, const std::array<int, kMaxDim>& dims, F&& f) {
    GridFunction g;
    g.n = n;
    g.lower = lower;
    g.h = h;
    g.dims = dims;
    g.values.resize(g.cell_count());
    for (std::size_t k = 0; k < g.values.size(); ++k) g.values[k] = f(g.cell_box(k).center());
    return g;
  }
};

namespace detail {

inline double box_distance(const Box& b, const Point& x) {
  double s = 0;
  for (int i = 0; i < b.n; ++i) {
    const double d = std::max({b.lo[i] - x[i], 0.0, x[i] - b.hi[i]});
    s += d * d;
  }
  return std::sqrt(s);
}

inline double box_farthest(const Box& b, const Point& x) {
  double s = 0;
  for (int i = 0; i < b.n; ++i) {
    const double d = std::max(std::abs(x[i] - b.lo[i]), std::abs(x[i] - b.hi[i]));
    s += d * d;
  }
  return std::sqrt(s);
}

/// Visit cells of g that meet the closed ball B(x, r).
template <class Visit>
void for_cells_near(const GridFunction& g, const Point& x, double r, Visit&& visit) {
  std::array<int, kMaxDim> lo{}, hi{};
  for (int i = 0; i < g.n; ++i) {
    lo[i] = std::max(0, static_cast<int>(std::floor((x[i] - r - g.lower[i]) / g.h)));
    hi[i] = std::min(g.dims[i] - 1, static_cast<int>(std::floor((x[i] + r - g.lower[i]) / g.h)));
    if (hi[i] < lo[i]) return;
  }
  std::array<int, kMaxDim> idx = lo;
  while (true) {
    std::size_t k = 0, stride = 1;
    for (int i = 0; i < g.n; ++i) {
      k += static_cast<std::size_t>(idx[i]) * stride;
      stride *= g.dims[i];
    }
    visit(k);
    int i = 0;
    while (i < g.n && ++idx[i] > hi[i]) {
      idx[i] = lo[i];
      ++i;
    }
    if (i == g.n) break;
  }
}

/// Midpoint sum of kern(|y - x|) over sub-cells of b whose centers lie in B(x, r).
template <class K>
double subsampled(const Box& b, const Point& x, double r, int k, K&& kern) {
  const int n = b.n;
  const double hs = b.side(0) / k;
  std::array<int, kMaxDim> idx{};
  CompensatedSum s;
  Point y{};
  const double vol = std::pow(hs, n);
  while (true) {
    double d2 = 0;
    for (int i = 0; i < n; ++i) {
      y[i] = b.lo[i] + (idx[i] + 0.5) * hs;
      d2 += (y[i] - x[i]) * (y[i] - x[i]);
    }
    if (d2 <= r * r) s.add(kern(std::sqrt(d2)) * vol);
    int i = 0;
    while (i < n && ++idx[i] == k) idx[i++] = 0;
    if (i == n) break;
  }
  return s.value();
}

}  // namespace detail

/// \int_{|x-y| <= 1/lambda} |f(y)| |x-y|^{alpha-n} dy for piecewise constant f.
/// Cells touching the neighbourhood of x are integrated exactly against the
/// singular kernel; cells cut by the outer sphere are subsampled 8^n-fold.
inline double truncated_riesz_apply(const GridFunction& f, double alpha, double lambda, const Point& x) {
  const int n = f.n;
  if (!(alpha > 0.0 && alpha < n)) throw std::invalid_argument("truncated_riesz_apply: alpha outside (0, n)");
  if (!(lambda > 0.0)) throw std::invalid_argument("truncated_riesz_apply: lambda must be positive");
  const double R = 1.0 / lambda;
  if (f.h > R / 8.0 * (1.0 + 1e-12)) throw std::invalid_argument("truncated_riesz_apply: grid spacing exceeds 1/(8 lambda)");
  const double e = alpha - n;
  const WeightSpec kern = WeightSpec::power(e);
  CompensatedSum sum;
  detail::for_cells_near(f, x, R, [&](std::size_t k) {
    const double v = std::abs(f.values[k]);
    if (v == 0.0) return;
    const Box b = f.cell_box(k);
    const double dmin = detail::box_distance(b, x);
    if (dmin > R) return;
    const double dmax = detail::box_farthest(b, x);
    if (dmin <= f.h) {
      Box shifted = b;
      for (int i = 0; i < n; ++i) {
        shifted.lo[i] -= x[i];
        shifted.hi[i] -= x[i];
      }
      if (dmax <= R) {
        sum.add(v * integrate_weight(kern, shifted, 1e-9).value);
      } else {
        const int sub = 64;
        sum.add(v * detail::subsampled(b, x, R, sub, [&](double d) { return d > 0 ? std::pow(d, e) : 0.0; }));
      }
      return;
    }
    if (dmax <= R) {
      const double d = norm([&] {
        Point c = b.center();
        for (int i = 0; i < n; ++i) c[i] -= x[i];
        return c;
      }(), n);
      sum.add(v * std::pow(d, e) * b.volume());
    } else {
      sum.add(v * detail::subsampled(b, x, R, 8, [&](double d) { return std::pow(d, e); }));
    }
  });
  return sum.value();
}

/// \int_{B(x, r)} |f| for piecewise constant f.
inline double ball_mass(const GridFunction& f, const Point& x, double r) {
  CompensatedSum sum;
  const int n = f.n;
  detail::for_cells_near(f, x, r, [&](std::size_t k) {
    const double v = std::abs(f.values[k]);
    if (v == 0.0) return;
    const Box b = f.cell_box(k);
    if (detail::box_distance(b, x) > r) return;
    if (detail::box_farthest(b, x) <= r) {
      sum.add(v * b.volume());
      return;
    }
    bool ball_inside = true;
    for (int i = 0; i < n; ++i) {
      if (!(b.lo[i] <= x[i] - r && x[i] + r <= b.hi[i])) ball_inside = false;
    }
    if (ball_inside) {
      sum.add(v * unit_ball_volume(n) * std::pow(r, n));
      return;
    }
    const int sub = std::clamp(static_cast<int>(std::ceil(8.0 * f.h / r)), 8, 64);
    sum.add(v * detail::subsampled(b, x, r, sub, [](double) { return 1.0; }));
  });
  return sum.value();
}

/// max over r in r_grid of r^{alpha-n} \int_{B(x,r)} |f|.
inline double local_fractional_maximal(const GridFunction& f, double alpha, double lambda, const Point& x,
                                       const std::vector<double>& r_grid) {
  if (r_grid.empty()) throw std::domain_error("local_fractional_maximal: empty radius grid");
  const double R = 1.0 / lambda;
  double best = 0.0;
  for (double r : r_grid) {
    if (!(r > 0.0 && r <= R * (1.0 + 1e-12))) throw std::invalid_argument("radius outside (0, 1/lambda]");
    best = std::max(best, std::pow(r, alpha - f.n) * ball_mass(f, x, r));
  }
  return best;
}

/// Geometric radius grid {R 2^{-j}}, j = 0..levels, ratio 2.
inline std::vector<double> dyadic_radii(double lambda, int levels) {
  std::vector<double> out;
  for (int j = levels; j >= 0; --j) out.push_back(std::ldexp(1.0 / lambda, -j));
  return out;
}

}  // namespace wib
