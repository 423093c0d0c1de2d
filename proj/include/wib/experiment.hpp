#pragma once

// Config-driven experiments: one runner per CLI command, each producing a
// RunReport whose primary table is the command's CSV.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "wib/capacity.hpp"
#include "wib/carleson.hpp"
#include "wib/config.hpp"
#include "wib/fourier_calibration.hpp"
#include "wib/kernels.hpp"
#include "wib/localization.hpp"
#include "wib/random.hpp"
#include "wib/report.hpp"
#include "wib/sparse.hpp"

namespace wib {

namespace detail {

inline std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

inline void put_fit(RunReport& r, const std::string& key, const SlopeFit& f) {
  r.summary[key] = f.slope;
  r.summary[key + "_ci_low"] = f.ci_low;
  r.summary[key + "_ci_high"] = f.ci_high;
}

inline std::vector<Profile> profiles_of(const ExperimentConfig& cfg) {
  if (!cfg.has("profiles")) return full_dictionary();
  std::vector<Profile> out;
  for (const std::string& s : cfg.strings("profiles")) {
    bool found = false;
    for (Profile p : full_dictionary()) {
      if (s == profile_name(p)) {
        out.push_back(p);
        found = true;
      }
    }
    if (!found) throw ConfigError(cfg.line_of("profiles"), "unknown profile '" + s + "'");
  }
  return out;
}

inline void require_positive(const ExperimentConfig& cfg, const std::string& key) {
  for (double v : cfg.numbers(key)) {
    if (!(v > 0.0)) throw ConfigError(cfg.line_of(key), "'" + key + "' entries must be positive");
  }
}

inline std::vector<Point> centers_of(const ExperimentConfig& cfg) {
  return cfg.has("centers") ? cfg.points("centers") : std::vector<Point>{Point{}};
}

/// Uniform direction times a log-uniform radius in [r0, r1].
inline Point random_point(Rng& rng, int n, double r0, double r1) {
  Point x{};
  double s = 0.0;
  while (!(s > 1e-12)) {
    s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = std::max(uniform01(rng), 1e-300), v = uniform01(rng);
      x[i] = std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
      s += x[i] * x[i];
    }
  }
  const double r = std::exp(uniform(rng, std::log(r0), std::log(r1)));
  for (int i = 0; i < n; ++i) x[i] *= r / std::sqrt(s);
  return x;
}

}  // namespace detail

/// Parameter constraints of each command, checked before any computation.
/// Violations become ConfigErrors anchored at the offending key.
inline void validate_experiment(const ExperimentConfig& cfg) {
  const Params prm = cfg.params();
  const std::string& c = cfg.command;
  auto anchored = [&](const std::exception& e) {
    const std::string msg = e.what();
    const std::string first = msg.substr(0, msg.find_first_of(" ,"));
    throw ConfigError(cfg.values.contains(first) ? cfg.line_of(first) : 1, msg);
  };
  try {
    for (const char* k : {"delta_list", "lambda_list", "beta_grid", "radii", "near_radii", "far_radii"}) {
      if (cfg.has(k)) detail::require_positive(cfg, k);
    }
    if (c == "threshold") {
      prm.validate_kernel();
      if (!(prm.theta >= 0.0 && prm.theta < (prm.n - 1) * (prm.p - 1.0))) {
        throw ConfigError(cfg.line_of("theta"), "theta outside [0, (n-1)(p-1))");
      }
      if (cfg.integer("depth") < 0 || cfg.integer("depth") > 24) throw ConfigError(cfg.line_of("depth"), "depth must be in [0, 24]");
      if (cfg.integer("chain") < 0 || cfg.integer("chain") > 16) throw ConfigError(cfg.line_of("chain"), "chain must be in [0, 16]");
      for (int j : cfg.integers("far_rings")) {
        if (j < 0 || j > 20) throw ConfigError(cfg.line_of("far_rings"), "far_rings entries must be in [0, 20]");
      }
      for (double d : cfg.numbers("delta_list")) {
        if (d > 1e6) throw ConfigError(cfg.line_of("delta_list"), "delta too large");
        if (dyadic_level_at_most(d) + cfg.integer("depth") + cfg.integer("chain") + 2 > kMaxLevel) {
          throw ConfigError(cfg.line_of("delta_list"), "delta too small for depth and chain (level 40 limit)");
        }
      }
    } else if (c == "c1") {
      prm.validate_threshold();
      if (cfg.integer("depth") < 0 || cfg.integer("depth") > 24) throw ConfigError(cfg.line_of("depth"), "depth must be in [0, 24]");
      if (cfg.has("region_lo") != cfg.has("region_hi")) {
        throw ConfigError(cfg.line_of(cfg.has("region_lo") ? "region_lo" : "region_hi"), "region_lo and region_hi go together");
      }
      if (cfg.has("region_lo")) {
        const Point lo = cfg.point("region_lo"), hi = cfg.point("region_hi");
        for (int i = 0; i < prm.n; ++i) {
          if (!(hi[i] > lo[i])) throw ConfigError(cfg.line_of("region_hi"), "region_hi must exceed region_lo");
        }
      }
    } else if (c == "capacity") {
      prm.validate_capacity();
      if (cfg.integer("cells") < 4 || cfg.integer("cells") > 256) throw ConfigError(cfg.line_of("cells"), "cells must be in [4, 256]");
      if (cfg.integer("iter_budget") < 1) throw ConfigError(cfg.line_of("iter_budget"), "iter_budget must be >= 1");
    } else if (c == "k2") {
      prm.validate_capacity();
      if (!(prm.muw_exponent() > -prm.n)) throw ConfigError(cfg.line_of("a"), "a p + theta must exceed -n");
    } else if (c == "poincare") {
      prm.validate_localization();
    } else if (c == "trudinger") {
      prm.validate_localization();
      if (!(prm.p > 1.0)) throw ConfigError(cfg.line_of("p"), "p must be > 1");
      if (!(prm.a > -prm.m && prm.a <= 0.0)) throw ConfigError(cfg.line_of("a"), "a must satisfy -m < a <= 0");
      if (cfg.numbers("delta_list").size() < 2) throw ConfigError(cfg.line_of("delta_list"), "need at least two deltas");
    } else if (c == "partition") {
      if (!(cfg.number("R") > 0.0)) throw ConfigError(cfg.line_of("R"), "R must be positive");
      for (double d : cfg.numbers("delta_list")) {
        if (d > cfg.number("R")) throw ConfigError(cfg.line_of("delta_list"), "delta must not exceed R");
      }
      if (cfg.integer("samples_per_axis") < 2) throw ConfigError(cfg.line_of("samples_per_axis"), "samples_per_axis must be >= 2");
      if (cfg.integer("identity_samples") < 1) throw ConfigError(cfg.line_of("identity_samples"), "identity_samples must be >= 1");
    } else if (c == "sparse-check") {
      if (!(prm.alpha > 0.0 && prm.alpha < prm.n)) throw ConfigError(cfg.line_of("alpha"), "alpha must lie in (0, n)");
      const long long d = cfg.integer("depth");
      if (d < 0 || d > 24 || prm.n * (d + 2) > 30) throw ConfigError(cfg.line_of("depth"), "depth must satisfy n (depth + 2) <= 30");
      if (!(cfg.number("threshold_factor") >= 2.0)) throw ConfigError(cfg.line_of("threshold_factor"), "threshold_factor must be >= 2");
      if (!(prm.lambda > 0.0 && prm.lambda <= 6.0)) throw ConfigError(cfg.line_of("lambda"), "lambda must lie in (0, 6]");
      for (const char* k : {"g_count", "x_count", "domination_g_count"}) {
        if (cfg.integer(k) < 1) throw ConfigError(cfg.line_of(k), std::string("'") + k + "' must be >= 1");
      }
    } else if (c == "kernel-check") {
      if (!(prm.alpha > 0.0 && prm.alpha < prm.n)) throw ConfigError(cfg.line_of("alpha"), "alpha must lie in (0, n)");
      if (!(cfg.number("calibration_alpha") > 0.0 && cfg.number("calibration_alpha") < 1.0)) {
        throw ConfigError(cfg.line_of("calibration_alpha"), "calibration_alpha must lie in (0, 1)");
      }
      if (!(cfg.number("tol") >= 1e-10)) throw ConfigError(cfg.line_of("tol"), "tol must be >= 1e-10");
      if (cfg.integer("sample_points") < 1) throw ConfigError(cfg.line_of("sample_points"), "sample_points must be >= 1");
      if (cfg.integer("maximal_points") < 0) throw ConfigError(cfg.line_of("maximal_points"), "maximal_points must be >= 0");
    } else if (c == "cor16") {
      prm.validate_localization();
      if (cfg.numbers("radii").size() < 2) throw ConfigError(cfg.line_of("radii"), "need at least two radii");
      if (!(prm.p > 1.0 && prm.p < (prm.beta + 1.0) * (prm.n + prm.theta) / prm.m)) {
        throw ConfigError(cfg.line_of("p"), "p must lie in (1, (beta + 1)(n + theta) / m)");
      }
      if (!(prm.m < prm.n / prm.p)) throw ConfigError(cfg.line_of("m"), "the capacity formula needs m < n / p");
    }
    if (cfg.has("tol") && !(cfg.number("tol") >= 1e-12 && cfg.number("tol") <= 1e-2)) {
      throw ConfigError(cfg.line_of("tol"), "tol must lie in [1e-12, 1e-2]");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    anchored(e);
  }
}

// ---------------------------------------------------------------------------

inline RunReport run_threshold(const ExperimentConfig& cfg, int workers) {
  RunReport r;
  ThresholdConfig tc;
  tc.base = cfg.params();
  tc.a_list = cfg.numbers("a_list");
  tc.delta_list = cfg.numbers("delta_list");
  tc.depth = static_cast<int>(cfg.integer("depth"));
  tc.chain = static_cast<int>(cfg.integer("chain"));
  tc.far_rings = cfg.integers("far_rings");
  tc.tol = cfg.number("tol");
  tc.workers = workers;
  const ThresholdTable tab = threshold_scan(tc);

  Table main{"threshold", {"a", "delta", "sup_xi", "argmax_side", "argmax_center_norm", "slope_fit", "stable_flag"}, {}};
  Table fits{"fits",
             {"a", "admissible", "origin_volume_slope", "origin_ci_low", "origin_ci_high", "far_center_slope",
              "far_ci_low", "far_ci_high", "final_over_initial"},
             {}};
  Table far{"far", {"a", "delta", "center_norm", "xi"}, {}};
  const std::size_t nd = tc.delta_list.size();
  std::size_t first = 0, last = 0;
  for (std::size_t i = 0; i < nd; ++i) {
    if (tc.delta_list[i] > tc.delta_list[first]) first = i;
    if (tc.delta_list[i] < tc.delta_list[last]) last = i;
  }
  for (std::size_t ia = 0; ia < tc.a_list.size(); ++ia) {
    const ThresholdFit& f = tab.fits[ia];
    const double nan = std::nan("");
    const double slope = !f.admissible ? nan : (f.a > 0.0 ? f.far_center_slope.slope : f.origin_volume_slope.slope);
    for (std::size_t id = 0; id < nd; ++id) {
      const ThresholdRow& row = tab.rows[ia * nd + id];
      main.add({row.a, row.delta, row.sup_xi, row.admissible ? row.argmax_side : nan,
                row.admissible ? row.argmax_center_norm : nan, slope, row.stable});
      for (std::size_t k = 0; k < row.far_xi.size(); ++k) far.add({row.a, row.delta, row.far_center_norm[k], row.far_xi[k]});
      if (!row.admissible) {
        if (id == 0) r.notes.push_back(detail::fmt("a=%.17g rejected: ", row.a) + row.reason);
      } else if (!row.stable) {
        r.flagged.push_back(detail::fmt("a=%.17g delta=%.17g: relative change %.3g at depth+2", row.a, row.delta,
                                        row.stability_change));
      }
    }
    const double ratio = f.admissible ? tab.rows[ia * nd + last].sup_xi / tab.rows[ia * nd + first].sup_xi : nan;
    fits.add({f.a, f.admissible, f.admissible ? f.origin_volume_slope.slope : nan,
              f.admissible ? f.origin_volume_slope.ci_low : nan, f.admissible ? f.origin_volume_slope.ci_high : nan,
              f.admissible ? f.far_center_slope.slope : nan, f.admissible ? f.far_center_slope.ci_low : nan,
              f.admissible ? f.far_center_slope.ci_high : nan, ratio});
  }
  if (!tab.converged) r.flagged.push_back("measure quadrature did not reach tolerance");
  r.notes.push_back("slope_fit: log Xi of origin cubes against log |Q| for a <= 0, log Xi against log |center| for a > 0");
  r.tables = {main, fits, far};
  return r;
}

inline RunReport run_c1(const ExperimentConfig& cfg, int workers) {
  RunReport r;
  const Params prm = cfg.params();
  const int n = prm.n;
  Box region{n, {}, {}};
  if (cfg.has("region_lo")) {
    region.lo = cfg.point("region_lo");
    region.hi = cfg.point("region_hi");
  } else {
    for (int i = 0; i < n; ++i) {
      region.lo[i] = -1.0;
      region.hi[i] = 1.0;
    }
  }
  CarlesonEngine eng(prm, cfg.number("tol"));
  const auto lambdas = cfg.numbers("lambda_list");
  std::vector<C1Result> res(lambdas.size());
  parallel_for(lambdas.size(), workers, [&](std::size_t i) {
    res[i] = c1_of_lambda(eng, lambdas[i], region, static_cast<int>(cfg.integer("depth")));
  });
  Table main{"c1", {"lambda", "c1", "argmax_side", "argmax_center_norm", "top_side", "roots", "stable_flag", "empty_flag"}, {}};
  std::vector<double> lx, ly;
  for (const C1Result& c : res) {
    main.add({c.lambda, c.value, c.empty ? std::nan("") : c.argmax.side(), c.empty ? std::nan("") : c.argmax.center_norm(),
              c.top_side, static_cast<long long>(c.roots), c.depthStable, c.empty});
    if (!c.empty && c.value > 0.0) {
      lx.push_back(c.lambda);
      ly.push_back(c.value);
    }
    if (!c.depthStable) r.flagged.push_back(detail::fmt("lambda=%.17g: relative change %.3g at depth+2", c.lambda, c.stabilityChange));
    if (!c.converged) r.flagged.push_back(detail::fmt("lambda=%.17g: measure quadrature did not converge", c.lambda));
    if (c.empty) r.notes.push_back(detail::fmt("lambda=%.17g: no admissible cube", c.lambda));
  }
  if (lx.size() >= 2) detail::put_fit(r, "lambda_slope", fit_loglog(lx, ly));
  r.tables = {main};
  return r;
}

inline RunReport run_capacity(const ExperimentConfig& cfg, int workers) {
  RunReport r;
  const Params prm = cfg.params();
  SolverOptions opt;
  opt.iter_budget = static_cast<int>(cfg.integer("iter_budget"));
  opt.gap_tol = cfg.number("gap_tol");
  opt.tol = cfg.number("tol");
  const Point center = cfg.has("center") ? cfg.point("center") : Point{};
  const CapacitySchedule s =
      capacity_schedule(cfg.numbers("delta_list"), center, prm, static_cast<int>(cfg.integer("cells")), opt, workers);
  Table main{"capacity",
             {"delta", "formula", "variational", "lower_bound", "ratio", "feasibility_gap", "iterations", "converged_flag"},
             {}};
  for (std::size_t k = 0; k < s.deltas.size(); ++k) {
    const CapacityEstimate& e = s.estimates[k];
    main.add({s.deltas[k], e.formulaValue, e.variationalValue, e.lowerBound, e.variationalValue / e.formulaValue,
              e.feasibilityGap, static_cast<long long>(e.iterations), e.converged});
    if (!e.converged) r.flagged.push_back(detail::fmt("delta=%.17g: solver stopped with gap above tolerance", s.deltas[k]));
  }
  if (s.deltas.size() >= 2) {
    detail::put_fit(r, "formula_slope", s.formula_slope);
    detail::put_fit(r, "variational_slope", s.variational_slope);
  }
  r.notes.push_back("variational: Riesz capacity of cell centres in B(x0, delta), grid half-width 2 delta");
  r.tables = {main};
  return r;
}

inline RunReport run_k2(const ExperimentConfig& cfg, int workers) {
  RunReport r;
  const Params prm = cfg.params();
  const auto centers = detail::centers_of(cfg);
  const K2Table t = capacity_ratio_k2(cfg.numbers("delta_list"), prm, centers, cfg.number("tol"), workers);
  Table main{"k2", {"delta", "sup_ratio", "argmax_center_norm"}, {}};
  Table per{"per_center", {"delta", "center_index", "center_norm", "ratio"}, {}};
  for (const K2Row& row : t.rows) {
    main.add({row.delta, row.sup, norm(centers[row.argmax], prm.n)});
    for (std::size_t j = 0; j < centers.size(); ++j) {
      per.add({row.delta, static_cast<long long>(j), norm(centers[j], prm.n), row.ratio[j]});
    }
  }
  if (t.rows.size() >= 2) detail::put_fit(r, "delta_slope", t.slope);
  r.notes.push_back("k2 lower bound: test sets are balls of diameter delta");
  r.tables = {main, per};
  return r;
}

inline RunReport run_poincare(const ExperimentConfig& cfg, int workers) {
  RunReport r;
  const Params prm = cfg.params();
  const auto deltas = cfg.numbers("delta_list");
  const auto centers = detail::centers_of(cfg);
  const auto dict = detail::profiles_of(cfg);
  const double tol = cfg.number("tol");
  const std::size_t nc = centers.size(), np = dict.size();
  std::vector<double> ratio(deltas.size() * nc * np);
  parallel_for(ratio.size(), workers, [&](std::size_t k) {
    const std::size_t i = k / (nc * np), j = (k / np) % nc, l = k % np;
    const TestFunction u(prm.n, dict[l], centers[j], deltas[i]);
    ratio[k] = poincare_ratio(u, centers[j], deltas[i], prm, tol);
  });
  Table main{"poincare", {"delta", "center_index", "center_norm", "profile", "ratio", "norm_ratio"}, {}};
  double lo = HUGE_VAL, hi = 0.0;
  for (std::size_t k = 0; k < ratio.size(); ++k) {
    const std::size_t i = k / (nc * np), j = (k / np) % nc, l = k % np;
    main.add({deltas[i], static_cast<long long>(j), norm(centers[j], prm.n), std::string(profile_name(dict[l])), ratio[k],
              ratio[k] * std::pow(deltas[i], prm.m)});
    lo = std::min(lo, ratio[k]);
    hi = std::max(hi, ratio[k]);
    if (!std::isfinite(ratio[k])) r.flagged.push_back(detail::fmt("delta=%.17g: non-finite ratio", deltas[i]));
  }
  r.summary["ratio_min"] = lo;
  r.summary["ratio_max"] = hi;
  Table fits{"fits", {"center_index", "profile", "norm_ratio_slope", "ci_low", "ci_high"}, {}};
  if (deltas.size() >= 2) {
    for (std::size_t j = 0; j < nc; ++j) {
      for (std::size_t l = 0; l < np; ++l) {
        std::vector<double> y;
        for (std::size_t i = 0; i < deltas.size(); ++i) y.push_back(ratio[(i * nc + j) * np + l] * std::pow(deltas[i], prm.m));
        const SlopeFit f = fit_loglog(deltas, y);
        fits.add({static_cast<long long>(j), std::string(profile_name(dict[l])), f.slope, f.ci_low, f.ci_high});
      }
    }
  }
  r.tables = {main, fits};
  if (cfg.has("v_exponent")) {
    const BoundednessTable b =
        local_boundedness_probe(prm, cfg.number("v_exponent"), deltas, centers, dict, workers, tol);
    Table bt{"boundedness", {"delta", "center_index", "center_norm", "dictionary_sup"}, {}};
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      for (std::size_t j = 0; j < nc; ++j) bt.add({deltas[i], static_cast<long long>(j), norm(centers[j], prm.n), b.value[i][j]});
    }
    r.tables.push_back(bt);
    r.notes.push_back("dictionary_sup is a lower bound for the sup over all test functions");
  }
  r.notes.push_back("norm_ratio = ||u||_{L^p(w)} / ||nabla^m u||_{L^p(M_S w)}");
  return r;
}

inline RunReport run_trudinger(const ExperimentConfig& cfg, int workers) {
  RunReport r;
  const Params prm = cfg.params();
  const TrudingerResult t = trudinger_probe(prm, cfg.numbers("beta_grid"), cfg.numbers("delta_list"),
                                            cfg.number("slack"), detail::profiles_of(cfg), workers);
  Table main{"trudinger", {"beta", "exponent", "slope", "holds_flag"}, {}};
  for (const TrudingerRow& row : t.rows) main.add({row.beta, row.exponent, row.slope, row.holds});
  Table ratios{"ratios", {"delta", "ratio"}, {}};
  for (std::size_t k = 0; k < t.deltas.size(); ++k) ratios.add({t.deltas[k], t.ratio[k]});
  r.summary["minimal_beta"] = t.minimal_beta;
  r.summary["found"] = t.found;
  detail::put_fit(r, "ratio_slope", t.ratio_fit);
  if (!t.found) r.notes.push_back("no beta in the grid satisfies the bound");
  r.tables = {main, ratios};
  return r;
}

inline RunReport run_partition(const ExperimentConfig& cfg, int workers, std::uint64_t seed) {
  RunReport r;
  const int n = static_cast<int>(cfg.integer("n"));
  const double R = cfg.number("R");
  const auto deltas = cfg.numbers("delta_list");
  const int samples = static_cast<int>(cfg.integer("identity_samples"));
  std::vector<Partition> parts(deltas.size());
  std::vector<double> err(deltas.size(), 0.0);
  std::vector<std::vector<Point>> xs(deltas.size());
  Rng rng(seed);
  for (auto& pts : xs) {
    while (static_cast<int>(pts.size()) < samples) {
      Point x{};
      for (int i = 0; i < n; ++i) x[i] = uniform(rng, -R, R);
      if (norm(x, n) < R) pts.push_back(x);
    }
  }
  parallel_for(deltas.size(), workers, [&](std::size_t k) {
    parts[k] = build_partition_of_unity(R, deltas[k], n, static_cast<int>(cfg.integer("samples_per_axis")));
    for (const Point& x : xs[k]) err[k] = std::max(err[k], std::abs(parts[k].sum_tau(x) - 1.0));
  });
  Table main{"partition", {"delta", "phi_min", "phi_max", "max_overlap", "grad_sup", "hess_sup", "identity_error"}, {}};
  std::vector<double> g, h;
  int ov_lo = 1 << 30, ov_hi = 0;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const Partition& p = parts[k];
    main.add({deltas[k], p.phi_min, p.phi_max, static_cast<long long>(p.max_overlap), p.grad_sup, p.hess_sup, err[k]});
    g.push_back(p.grad_sup);
    h.push_back(p.hess_sup);
    ov_lo = std::min(ov_lo, p.max_overlap);
    ov_hi = std::max(ov_hi, p.max_overlap);
  }
  if (deltas.size() >= 2) {
    detail::put_fit(r, "grad_slope", fit_loglog(deltas, g));
    detail::put_fit(r, "hess_slope", fit_loglog(deltas, h));
  }
  r.summary["overlap_delta_independent"] = ov_lo == ov_hi;
  r.tables = {main};
  return r;
}

inline RunReport run_sparse_check(const ExperimentConfig& cfg, int workers, std::uint64_t seed) {
  RunReport r;
  const int n = static_cast<int>(cfg.integer("n"));
  const int depth = static_cast<int>(cfg.integer("depth"));
  const double alpha = cfg.number("alpha"), lambda = cfg.number("lambda"), factor = cfg.number("threshold_factor");
  const int gc = static_cast<int>(cfg.integer("g_count"));
  const CubeTree tree(make_cube(n, Shift{}, 0, {}), depth);
  std::vector<double> leb(tree.count(depth), std::ldexp(1.0, -n * depth));
  const TreeMeasure lebesgue = TreeMeasure::from_leaves(tree, depth, leb);
  Rng rng(seed);
  std::vector<TreeMeasure> gs;
  for (int i = 0; i < gc; ++i) gs.push_back(random_cascade(tree, depth, rng));
  struct Row {
    std::size_t size = 0;
    double min_witness = 1.0;
    std::size_t violations = 0;
    double l25 = 0.0, l25_half = 0.0, l26 = 0.0;
  };
  std::vector<Row> rows(gc);
  const std::uint64_t lam_seed = rng();
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    const SparseFamily fam = build_sparse_family(gs[i], factor);
    Row& row = rows[i];
    row.size = fam.size();
    for (const SparseNode& q : fam.nodes) {
      row.min_witness = std::min(row.min_witness, q.witness / q.cube.volume());
      if (q.witness < 0.5 * q.cube.volume()) ++row.violations;
    }
    Rng lr(lam_seed + i);
    std::vector<double> lam(fam.size());
    for (double& v : lam) v = uniform01(lr);
    row.l25 = check_sparse_lemmas(fam, lebesgue, 1.0, 0.0, lam, lebesgue, 2.0).lemma25_max;
    const SparseLemmaReport half = check_sparse_lemmas(fam, lebesgue, 0.5, 0.5, lam, lebesgue, 2.0);
    row.l25_half = half.lemma25_max;
    row.l26 = half.lemma26_ratio;
  });
  Table main{"sparse-check",
             {"g", "family_size", "min_witness_fraction", "violations", "lemma25_ratio", "lemma25_half_ratio", "lemma26_ratio"},
             {}};
  long long violations = 0;
  double l25 = 0.0;
  for (int i = 0; i < gc; ++i) {
    const Row& w = rows[i];
    main.add({static_cast<long long>(i), static_cast<long long>(w.size), w.min_witness, static_cast<long long>(w.violations),
              w.l25, w.l25_half, w.l26});
    violations += static_cast<long long>(w.violations);
    l25 = std::max(l25, w.l25);
  }
  const DominationReport d = domination_constant(n, alpha, depth, depth, static_cast<int>(cfg.integer("domination_g_count")),
                                                 static_cast<int>(cfg.integer("x_count")), rng(), lambda, workers);
  Table dom{"domination", {"n", "alpha", "depth", "constant", "constant_deeper", "drift", "min_ratio", "pairs"}, {}};
  dom.add({static_cast<long long>(n), alpha, static_cast<long long>(depth), d.constant, d.constant_deeper, d.drift, d.min_ratio,
           static_cast<long long>(d.pairs)});
  r.summary["violations"] = violations;
  r.summary["lemma25_max"] = l25;
  r.summary["domination_constant"] = d.constant;
  r.summary["domination_drift"] = d.drift;
  if (violations > 0) r.flagged.push_back("sparseness violated");
  if (!(d.drift < 0.1)) r.flagged.push_back(detail::fmt("domination constant drifts %.3g under depth+2", d.drift));
  r.tables = {main, dom};
  return r;
}

inline RunReport run_kernel_check(const ExperimentConfig& cfg, int workers, std::uint64_t seed) {
  RunReport r;
  const int n = static_cast<int>(cfg.integer("n"));
  const double alpha = cfg.number("alpha"), tol = cfg.number("tol");
  const auto lambdas = cfg.numbers("lambda_list");
  Rng rng(seed);
  std::vector<Point> xs;
  for (long long i = 0; i < cfg.integer("sample_points"); ++i) xs.push_back(detail::random_point(rng, n, 1e-2, 10.0));
  Table main{"kernel-check", {"lambda", "point_index", "radius", "value", "residual"}, {}};
  std::vector<double> val(lambdas.size() * xs.size()), res(val.size());
  std::vector<char> conv(val.size(), 1);
  parallel_for(val.size(), workers, [&](std::size_t k) {
    const double lam = lambdas[k / xs.size()];
    const Point& x = xs[k % xs.size()];
    Point y{};
    for (int i = 0; i < n; ++i) y[i] = lam * x[i];
    const KernelValue a = bessel_kernel(n, alpha, lam, x, tol);
    const KernelValue b = bessel_kernel_unit(n, alpha, y, tol);
    val[k] = a.value;
    res[k] = a.value - std::pow(lam, n - alpha) * b.value;
    conv[k] = a.converged && b.converged;
  });
  double max_res = 0.0;
  for (std::size_t k = 0; k < val.size(); ++k) {
    main.add({lambdas[k / xs.size()], static_cast<long long>(k % xs.size()), norm(xs[k % xs.size()], n), val[k], res[k]});
    max_res = std::max(max_res, std::abs(res[k]));
    if (!conv[k]) r.flagged.push_back(detail::fmt("lambda=%.17g point %.0f: kernel quadrature not converged", lambdas[k / xs.size()], k % xs.size()));
  }
  r.summary["scaling_residual_max"] = max_res;

  Table near{"near", {"radius", "ratio"}, {}};
  double lo = HUGE_VAL, hi = 0.0;
  for (double rad : cfg.numbers("near_radii")) {
    Point x{};
    x[0] = rad;
    const double q = bessel_kernel_unit(n, alpha, x, tol).value / std::pow(rad, alpha - n);
    near.add({rad, q});
    lo = std::min(lo, q);
    hi = std::max(hi, q);
  }
  r.summary["near_band"] = hi / lo;

  Table far{"far", {"radius", "damped"}, {}};
  double prev = HUGE_VAL;
  bool decreasing = true;
  for (double rad : cfg.numbers("far_radii")) {
    Point x{};
    x[0] = rad;
    const double d = std::exp(rad / 2.0) * bessel_kernel_unit(n, alpha, x, tol).value;
    far.add({rad, d});
    decreasing = decreasing && d < prev;
    prev = d;
  }
  r.summary["far_decreasing"] = decreasing;

  Table cal{"calibration", {"radius", "fft", "quadrature", "ratio"}, {}};
  double cal_err = 0.0;
  for (const CalibrationPoint& c : fft_calibration(cfg.number("calibration_alpha"))) {
    cal.add({c.radius, c.fft_value, c.quadrature_value, c.ratio});
    cal_err = std::max(cal_err, std::abs(c.ratio - 1.0));
  }
  r.summary["calibration_error"] = cal_err;
  if (!(cal_err <= 1e-3)) r.flagged.push_back(detail::fmt("FFT calibration off by %.3g", cal_err));

  const long long mp = cfg.integer("maximal_points");
  if (mp > 0) {
    const double lam = lambdas.front();
    const double h = 1.0 / (16.0 * lam);
    std::array<int, kMaxDim> dims{};
    Point lower{};
    for (int i = 0; i < n; ++i) {
      dims[i] = 64;
      lower[i] = -32.0 * h;
    }
    const GridFunction f = GridFunction::sample(n, lower, h, dims, [&](const Point& y) {
      return std::exp(-4.0 * lam * lam * (norm(y, n) * norm(y, n)));
    });
    std::vector<Point> mx;
    for (long long i = 0; i < mp; ++i) {
      Point x{};
      for (int d = 0; d < n; ++d) x[d] = uniform(rng, -24.0 * h, 24.0 * h);
      mx.push_back(x);
    }
    std::vector<double> q(mx.size());
    const auto radii = dyadic_radii(lam, 8);
    parallel_for(mx.size(), workers, [&](std::size_t i) {
      q[i] = local_fractional_maximal(f, alpha, lam, mx[i], radii) / truncated_riesz_apply(f, alpha, lam, mx[i]);
    });
    r.summary["maximal_over_riesz_max"] = *std::max_element(q.begin(), q.end());
  }
  r.tables = {main, near, far, cal};
  return r;
}

inline RunReport run_cor16(const ExperimentConfig& cfg) {
  RunReport r;
  const Params prm = cfg.params();
  const Cor16Report c = check_corollary16(prm, cfg.optional_number("v_exponent"), cfg.numbers("radii"));
  Table main{"cor16", {"radius", "v", "capacity", "ratio"}, {}};
  for (std::size_t k = 0; k < c.radii.size(); ++k) main.add({c.radii[k], c.v[k], c.capacity[k], c.ratio[k]});
  r.summary["q"] = c.q;
  r.summary["sup"] = c.sup;
  r.summary["interior"] = c.interior;
  r.summary["slope"] = c.slope;
  r.summary["pass"] = c.pass;
  r.tables = {main};
  return r;
}

/// Runs a validated config.  `workers` and `seed` override the config values
/// when given; the echo keeps the values from the file.
inline RunReport run_experiment(const ExperimentConfig& cfg, std::optional<int> workers_override = std::nullopt,
                                std::optional<std::uint64_t> seed_override = std::nullopt) {
  validate_experiment(cfg);
  const int workers = workers_override.value_or(static_cast<int>(cfg.integer("workers")));
  const std::uint64_t seed = seed_override.value_or(static_cast<std::uint64_t>(cfg.integer("seed")));
  const auto t0 = std::chrono::steady_clock::now();
  RunReport r;
  const std::string& c = cfg.command;
  if (c == "threshold") r = run_threshold(cfg, workers);
  else if (c == "c1") r = run_c1(cfg, workers);
  else if (c == "capacity") r = run_capacity(cfg, workers);
  else if (c == "k2") r = run_k2(cfg, workers);
  else if (c == "poincare") r = run_poincare(cfg, workers);
  else if (c == "trudinger") r = run_trudinger(cfg, workers);
  else if (c == "partition") r = run_partition(cfg, workers, seed);
  else if (c == "sparse-check") r = run_sparse_check(cfg, workers, seed);
  else if (c == "kernel-check") r = run_kernel_check(cfg, workers, seed);
  else if (c == "cor16") r = run_cor16(cfg);
  r.command = c;
  r.config = cfg.to_json();
  if (seed_override) r.config["seed"] = static_cast<long long>(seed);
  r.timings["total_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace wib
