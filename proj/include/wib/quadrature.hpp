#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "wib/numeric.hpp"

namespace wib {

struct GaussRule {
  std::vector<double> nodes;    ///< on [-1, 1]
  std::vector<double> weights;
};

inline GaussRule make_gauss_legendre(int order) {
  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

/// Cached rules; orders 4, 8, 16, 32 are precomputed.
inline const GaussRule& gauss_legendre(int order) {
  static const GaussRule r4 = make_gauss_legendre(4);
  static const GaussRule r8 = make_gauss_legendre(8);
  static const GaussRule r16 = make_gauss_legendre(16);
  static const GaussRule r32 = make_gauss_legendre(32);
  switch (order) {
    case 4: return r4;
    case 8: return r8;
    case 16: return r16;
    case 32: return r32;
    default: throw std::invalid_argument("gauss_legendre: supported orders are 4, 8, 16, 32");
  }
}

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  ///< absolute error estimate
  bool converged = true;
  long evaluations = 0;
};

/// Double-exponential (tanh-sinh) rule on [a, b].  The integrand is called as
/// f(x, x - a, b - x) with both distances computed without cancellation, so
/// endpoint singularities like (x - a)^{-0.9} are resolved.
template <class F>
QuadResult tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-10, double abs_tol = 0.0,
                     int max_level = 9) {
  QuadResult res;
  if (!(b > a)) {
    if (a == b) return res;
    throw std::invalid_argument("tanh_sinh: interval reversed");
  }
  constexpr double kUMax = 6.5;
  const double len = b - a;
  const double half_pi = 0.5 * std::numbers::pi;

  auto term = [&](double u) -> double {
    const double v = half_pi * std::sinh(u);
    const double e = std::exp(-2.0 * std::abs(v));
    const double d_near = len * e / (1.0 + e);
    if (d_near <= 0.0) return 0.0;
    const double d_far = len - d_near;
    const double w = 0.5 * len * half_pi * std::cosh(u) * 4.0 * e / ((1.0 + e) * (1.0 + e));
    if (w == 0.0) return 0.0;
    ++res.evaluations;
    double fx;
    if (u < 0) {
      fx = f(a + d_near, d_near, d_far);
    } else {
      fx = f(b - d_near, d_far, d_near);
    }
    return w * fx;
  };

  double h = 1.0;
  CompensatedSum sum;
  sum.add(term(0.0));
  for (int k = 1; k * h <= kUMax; ++k) {
    sum.add(term(k * h));
    sum.add(term(-k * h));
  }
  double estimate = h * sum.value();
  for (int level = 1; level <= max_level; ++level) {
    h *= 0.5;
    CompensatedSum fresh;
    for (int k = 1; k * h <= kUMax; k += 2) {
      fresh.add(term(k * h));
      fresh.add(term(-k * h));
    }
    sum.add(fresh.value());
    const double next = h * sum.value();
    const double diff = std::abs(next - estimate);
    estimate = next;
    res.error = diff;
    if (level >= 3 && diff <= std::max(rel_tol * std::abs(next), abs_tol)) {
      res.value = next;
      res.converged = true;
      return res;
    }
  }
  res.value = estimate;
  res.converged = false;
  return res;
}

}  // namespace wib
