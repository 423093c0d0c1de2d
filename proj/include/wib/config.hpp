#pragma once

// Strict JSON experiment configuration: every command declares its keys,
// unknown keys are rejected, and diagnostics carry the line of the key.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wib/geometry.hpp"
#include "wib/params.hpp"

namespace wib {

using Json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class KeyKind { kNumber, kInteger, kNumberList, kIntegerList, kPointList, kPoint, kStringList, kBool };

struct KeySpec {
  std::string name;
  KeyKind kind;
  Json fallback;  ///< null: optional without default
  bool required = false;
};

namespace detail {

/// Line of every object key and array element, addressed by JSON pointer.
inline std::map<std::string, int> key_lines(const std::string& text) {
  struct Frame {
    bool object;
    std::string base;
    std::string key;
    int index = 0;
    bool expect_key = true;
    bool element_seen = false;
  };
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;
  auto value_start = [&] {
    if (stack.empty()) return;
    Frame& f = stack.back();
    if (!f.object && !f.element_seen) {
      lines.emplace(f.base + "/" + std::to_string(f.index), line);
      f.element_seen = true;
    }
  };
  auto current = [&]() -> std::string {
    if (stack.empty()) return "";
    const Frame& f = stack.back();
    return f.base + "/" + (f.object ? f.key : std::to_string(f.index));
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      continue;
    }
    if (c == '"') {
      std::string s;
      for (++i; i < text.size() && text[i] != '"'; ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) ++i;
        s += text[i];
      }
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        stack.back().key = s;
        stack.back().expect_key = false;
        lines.emplace(stack.back().base + "/" + s, line);
      } else {
        value_start();
      }
      continue;
    }
    if (c == '{' || c == '[') {
      value_start();
      const std::string base = current();
      stack.push_back({c == '{', base, "", 0, true, false});
      continue;
    }
    if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
      continue;
    }
    if (c == ',') {
      if (!stack.empty()) {
        Frame& f = stack.back();
        if (f.object) {
          f.expect_key = true;
        } else {
          ++f.index;
          f.element_seen = false;
        }
      }
      continue;
    }
    if (c == ':' || c == ' ' || c == '\t' || c == '\r') continue;
    value_start();
  }
  return lines;
}

inline int line_at_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline Json numbers(std::initializer_list<double> v) { return Json(std::vector<double>(v)); }

}  // namespace detail

/// Key table per command.  Shared analytic keys first.
inline std::vector<KeySpec> command_schema(const std::string& command) {
  using K = KeyKind;
  std::vector<KeySpec> s{{"workers", K::kInteger, 1}, {"seed", K::kInteger, 0}};
  auto add = [&s](std::initializer_list<KeySpec> more) { s.insert(s.end(), more); };
  if (command == "threshold") {
    add({{"n", K::kInteger, 2}, {"p", K::kNumber, 2.0}, {"alpha", K::kNumber, 0.5}, {"theta", K::kNumber, 0.0},
         {"a_list", K::kNumberList, nullptr, true}, {"delta_list", K::kNumberList, nullptr, true},
         {"depth", K::kInteger, 8}, {"chain", K::kInteger, 12},
         {"far_rings", K::kIntegerList, Json(std::vector<int>{2, 3, 4, 5, 6, 7, 8})}, {"tol", K::kNumber, 1e-8}});
  } else if (command == "c1") {
    add({{"n", K::kInteger, 2}, {"p", K::kNumber, 2.0}, {"alpha", K::kNumber, 0.5}, {"theta", K::kNumber, 0.0},
         {"a", K::kNumber, 0.0}, {"lambda_list", K::kNumberList, nullptr, true}, {"region_lo", K::kPoint, nullptr},
         {"region_hi", K::kPoint, nullptr}, {"depth", K::kInteger, 8}, {"tol", K::kNumber, 1e-8}});
  } else if (command == "capacity") {
    add({{"n", K::kInteger, 2}, {"p", K::kNumber, 2.0}, {"alpha", K::kNumber, 0.5}, {"theta", K::kNumber, 0.0},
         {"delta_list", K::kNumberList, nullptr, true}, {"center", K::kPoint, nullptr}, {"cells", K::kInteger, 32},
         {"iter_budget", K::kInteger, 5000}, {"gap_tol", K::kNumber, 1e-4}, {"tol", K::kNumber, 1e-8}});
  } else if (command == "k2") {
    add({{"n", K::kInteger, 2}, {"p", K::kNumber, 2.0}, {"alpha", K::kNumber, 0.5}, {"theta", K::kNumber, 0.0},
         {"a", K::kNumber, -0.25}, {"delta_list", K::kNumberList, nullptr, true}, {"centers", K::kPointList, nullptr},
         {"tol", K::kNumber, 1e-8}});
  } else if (command == "poincare") {
    add({{"n", K::kInteger, 2}, {"p", K::kNumber, 2.0}, {"m", K::kInteger, 1}, {"theta", K::kNumber, 0.0},
         {"delta_list", K::kNumberList, nullptr, true}, {"centers", K::kPointList, nullptr},
         {"profiles", K::kStringList, nullptr}, {"v_exponent", K::kNumber, nullptr}, {"tol", K::kNumber, 1e-6}});
  } else if (command == "trudinger") {
    add({{"n", K::kInteger, 2}, {"p", K::kNumber, 2.0}, {"m", K::kInteger, 1}, {"theta", K::kNumber, 0.0},
         {"a", K::kNumber, -0.5}, {"beta_grid", K::kNumberList, nullptr, true},
         {"delta_list", K::kNumberList, nullptr, true}, {"slack", K::kNumber, 0.02},
         {"profiles", K::kStringList, nullptr}});
  } else if (command == "partition") {
    add({{"n", K::kInteger, 2}, {"R", K::kNumber, 1.0}, {"delta_list", K::kNumberList, nullptr, true},
         {"samples_per_axis", K::kInteger, 25}, {"identity_samples", K::kInteger, 10000}});
  } else if (command == "sparse-check") {
    add({{"n", K::kInteger, 1}, {"alpha", K::kNumber, 0.5}, {"lambda", K::kNumber, 1.0}, {"depth", K::kInteger, 10},
         {"g_count", K::kInteger, 200}, {"x_count", K::kInteger, 50}, {"domination_g_count", K::kInteger, 100},
         {"threshold_factor", K::kNumber, 2.0}});
  } else if (command == "kernel-check") {
    add({{"n", K::kInteger, 2}, {"alpha", K::kNumber, 1.0}, {"lambda_list", K::kNumberList, nullptr, true},
         {"sample_points", K::kInteger, 100}, {"near_radii", K::kNumberList, detail::numbers({1e-4, 1e-3, 1e-2, 0.1, 0.5})},
         {"far_radii", K::kNumberList, detail::numbers({2, 5, 10, 20, 30, 40, 50})},
         {"calibration_alpha", K::kNumber, 0.5}, {"maximal_points", K::kInteger, 200}, {"tol", K::kNumber, 1e-10}});
  } else if (command == "cor16") {
    add({{"n", K::kInteger, 3}, {"p", K::kNumber, 2.0}, {"m", K::kInteger, 1}, {"theta", K::kNumber, 0.0},
         {"beta", K::kNumber, 1.0}, {"v_exponent", K::kNumber, nullptr}, {"radii", K::kNumberList, nullptr, true}});
  } else {
    throw ConfigError(0, "unknown command '" + command + "'");
  }
  return s;
}

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"threshold", "c1",        "capacity",     "k2",           "poincare",
                                              "trudinger", "partition", "sparse-check", "kernel-check", "cor16"};
  return names;
}

/// A validated configuration.  `values` holds every declared key, defaults
/// filled in, so emit() is canonical and parse(emit()) reproduces it.
struct ExperimentConfig {
  std::string command;
  Json values = Json::object();
  std::map<std::string, int> lines;

  bool has(const std::string& k) const { return values.contains(k) && !values.at(k).is_null(); }
  double number(const std::string& k) const { return values.at(k).get<double>(); }
  long long integer(const std::string& k) const { return values.at(k).get<long long>(); }
  std::vector<double> numbers(const std::string& k) const { return values.at(k).get<std::vector<double>>(); }
  std::vector<int> integers(const std::string& k) const { return values.at(k).get<std::vector<int>>(); }
  std::vector<std::string> strings(const std::string& k) const { return values.at(k).get<std::vector<std::string>>(); }
  std::optional<double> optional_number(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    return number(k);
  }
  Point point(const std::string& k) const {
    Point x{};
    const auto v = values.at(k).get<std::vector<double>>();
    for (std::size_t i = 0; i < v.size(); ++i) x[i] = v[i];
    return x;
  }
  std::vector<Point> points(const std::string& k) const {
    std::vector<Point> out;
    for (const auto& row : values.at(k)) {
      Point x{};
      const auto v = row.get<std::vector<double>>();
      for (std::size_t i = 0; i < v.size(); ++i) x[i] = v[i];
      out.push_back(x);
    }
    return out;
  }
  int line_of(const std::string& k) const {
    auto it = lines.find("/" + k);
    return it == lines.end() ? 1 : it->second;
  }

  /// Analytic parameters present in this command's schema.
  Params params() const {
    Params prm;
    if (has("n")) prm.n = static_cast<int>(integer("n"));
    if (has("p")) prm.p = number("p");
    if (has("alpha")) prm.alpha = number("alpha");
    if (has("m")) prm.m = static_cast<int>(integer("m"));
    if (has("theta")) prm.theta = number("theta");
    if (has("a")) prm.a = number("a");
    if (has("lambda")) prm.lambda = number("lambda");
    if (has("beta")) prm.beta = number("beta");
    if (has("depth")) prm.depth = static_cast<int>(integer("depth"));
    return prm;
  }

  Json to_json() const {
    Json j = values;
    j["command"] = command;
    return j;
  }
  std::string emit() const { return to_json().dump(2) + "\n"; }
};

namespace detail {

inline void check_kind(const KeySpec& spec, const Json& v, int line, int n) {
  auto fail = [&](const std::string& what) { throw ConfigError(line, "'" + spec.name + "' must be " + what); };
  auto is_int = [](const Json& x) { return x.is_number_integer(); };
  switch (spec.kind) {
    case KeyKind::kNumber:
      if (!v.is_number()) fail("a number");
      if (!std::isfinite(v.get<double>())) fail("finite");
      break;
    case KeyKind::kInteger:
      if (!is_int(v)) fail("an integer");
      break;
    case KeyKind::kBool:
      if (!v.is_boolean()) fail("a boolean");
      break;
    case KeyKind::kNumberList:
    case KeyKind::kIntegerList:
      if (!v.is_array()) fail("a list");
      if (v.empty()) fail("a non-empty list");
      for (const auto& x : v) {
        if (spec.kind == KeyKind::kIntegerList ? !is_int(x) : !x.is_number()) {
          fail(spec.kind == KeyKind::kIntegerList ? "a list of integers" : "a list of numbers");
        }
      }
      break;
    case KeyKind::kStringList:
      if (!v.is_array() || v.empty()) fail("a non-empty list of strings");
      for (const auto& x : v) {
        if (!x.is_string()) fail("a non-empty list of strings");
      }
      break;
    case KeyKind::kPoint:
      if (!v.is_array() || static_cast<int>(v.size()) != n) fail("a point with n coordinates");
      for (const auto& x : v) {
        if (!x.is_number()) fail("a point with n coordinates");
      }
      break;
    case KeyKind::kPointList:
      if (!v.is_array() || v.empty()) fail("a non-empty list of points");
      for (const auto& row : v) {
        if (!row.is_array() || static_cast<int>(row.size()) != n) fail("a list of points with n coordinates each");
        for (const auto& x : row) {
          if (!x.is_number()) fail("a list of points with n coordinates each");
        }
      }
      break;
  }
}

}  // namespace detail

/// Parses and validates; `command` overrides (and must agree with) a
/// "command" key in the text when both are present.
inline ExperimentConfig parse_config(const std::string& text, std::string command = "") {
  Json raw;
  try {
    raw = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(detail::line_at_offset(text, e.byte == 0 ? 0 : e.byte - 1), "invalid JSON");
  }
  ExperimentConfig cfg;
  cfg.lines = detail::key_lines(text);
  if (!raw.is_object()) throw ConfigError(1, "config must be a JSON object");
  if (raw.contains("command")) {
    if (!raw["command"].is_string()) throw ConfigError(cfg.line_of("command"), "'command' must be a string");
    const std::string c = raw["command"].get<std::string>();
    if (!command.empty() && c != command) {
      throw ConfigError(cfg.line_of("command"), "config is for '" + c + "', not '" + command + "'");
    }
    command = c;
  }
  if (command.empty()) throw ConfigError(1, "no command given");
  if (std::find(command_names().begin(), command_names().end(), command) == command_names().end()) {
    throw ConfigError(raw.contains("command") ? cfg.line_of("command") : 1, "unknown command '" + command + "'");
  }
  cfg.command = command;
  const auto schema = command_schema(command);
  for (auto it = raw.begin(); it != raw.end(); ++it) {
    if (it.key() == "command") continue;
    const bool known = std::any_of(schema.begin(), schema.end(), [&](const KeySpec& k) { return k.name == it.key(); });
    if (!known) throw ConfigError(cfg.line_of(it.key()), "unknown key '" + it.key() + "' for command " + command);
  }
  int n = 0;
  for (const auto& spec : schema) {
    if (spec.name == "n") {
      const Json v = raw.contains("n") ? raw["n"] : spec.fallback;
      detail::check_kind(spec, v, cfg.line_of("n"), 0);
      n = v.get<int>();
      if (n < 1 || n > kMaxDim) throw ConfigError(cfg.line_of("n"), "n must be in [1, 4]");
    }
  }
  for (const auto& spec : schema) {
    if (raw.contains(spec.name) && !raw[spec.name].is_null()) {
      detail::check_kind(spec, raw[spec.name], cfg.line_of(spec.name), n);
      cfg.values[spec.name] = raw[spec.name];
    } else if (spec.required) {
      throw ConfigError(1, "missing required key '" + spec.name + "'");
    } else {
      cfg.values[spec.name] = spec.fallback;
    }
  }
  if (cfg.integer("workers") < 1) throw ConfigError(cfg.line_of("workers"), "'workers' must be >= 1");
  if (cfg.integer("seed") < 0) throw ConfigError(cfg.line_of("seed"), "'seed' must be >= 0");
  return cfg;
}

}  // namespace wib
