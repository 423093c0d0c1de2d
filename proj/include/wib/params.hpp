#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "wib/numeric.hpp"

namespace wib {

class ParamError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Analytic parameters shared by the experiments.  Which constraints apply
/// depends on the experiment, so validation is split into named checks.
struct Params {
  int n = 2;
  double p = 2.0;
  double alpha = 0.5;
  int m = 1;
  double theta = 0.0;
  double a = 0.0;
  double lambda = 1.0;
  double delta = 1.0;
  double beta = 1.0;
  int depth = 10;

  double p_dual() const { return dual_exponent(p); }
  double sigma_exponent() const { return theta * (1.0 - p_dual()); }
  double muw_exponent() const { return a * p + theta; }

  void validate_basic() const {
    if (n < 1 || n > kMaxDim) throw ParamError("n must be in [1, 4]");
    if (!(p >= 1.0) || !std::isfinite(p)) throw ParamError("p must be >= 1");
    if (!(lambda > 0.0)) throw ParamError("lambda must be positive");
    if (!(delta > 0.0)) throw ParamError("delta must be positive");
    if (!(beta > 0.0)) throw ParamError("beta must be positive");
    if (depth < 0 || depth > 24) throw ParamError("depth must be in [0, 24]");
  }

  /// 1 < p, 0 < alpha < n.
  void validate_kernel() const {
    validate_basic();
    if (!(p > 1.0)) throw ParamError("p must be > 1");
    if (!(alpha > 0.0 && alpha < n)) throw ParamError("alpha must lie in (0, n)");
  }

  bool threshold_admissible(std::string* reason = nullptr) const {
    const double pd = p_dual();
    if (!(theta >= 0.0 && theta < (n - 1) * (p - 1.0))) {
      if (reason) *reason = "theta outside [0, (n-1)(p-1))";
      return false;
    }
    if (!(a > -n / p + (pd - 1.0) * theta / p)) {
      if (reason) *reason = "a <= -n/p + (p'-1)theta/p (sigma or mu w not locally integrable)";
      return false;
    }
    return true;
  }

  void validate_threshold() const {
    validate_kernel();
    std::string why;
    if (!threshold_admissible(&why)) throw ParamError(why);
  }

  void validate_localization() const {
    validate_basic();
    if (!(theta > 1.0 - n && theta <= 0.0)) throw ParamError("theta must lie in (1-n, 0]");
    if (m < 1 || m >= n) throw ParamError("m must satisfy 1 <= m < n");
  }

  void validate_capacity() const {
    validate_kernel();
    if (!(alpha < n / p)) throw ParamError("capacity requires alpha < n/p");
  }
};

}  // namespace wib
