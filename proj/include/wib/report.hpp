#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace wib {

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Cell = std::variant<double, long long, bool, std::string>;

/// One CSV-shaped table.  Column types are fixed by the first row.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("row width does not match table " + name);
    rows.push_back(std::move(row));
  }
};

struct RunReport {
  std::string command;
  nlohmann::json config;                  ///< canonical config echo
  std::vector<Table> tables;              ///< tables[0] is the primary CSV
  std::map<std::string, Cell> summary;    ///< fitted slopes, intervals, verdicts
  std::vector<std::string> flagged;       ///< non-converged or unstable rows
  std::vector<std::string> notes;
  std::map<std::string, double> timings;  ///< seconds; JSON only

  const Table& table(const std::string& name) const {
    for (const auto& t : tables) {
      if (t.name == name) return t;
    }
    throw std::out_of_range("no table " + name);
  }
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_cell(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return format_double(*d);
  if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
  if (const bool* b = std::get_if<bool>(&c)) return *b ? "1" : "0";
  const std::string& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
    out += "\n";
  }
  return out;
}

namespace detail {

/// Doubles are tagged so that integers, NaN and infinities survive a round trip.
inline nlohmann::json cell_json(const Cell& c) {
  using nlohmann::json;
  if (const double* d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return json{{"f", *d}};
    return json{{"f", std::isnan(*d) ? "nan" : (*d > 0 ? "inf" : "-inf")}};
  }
  if (const long long* i = std::get_if<long long>(&c)) return json{{"i", *i}};
  if (const bool* b = std::get_if<bool>(&c)) return json{{"b", *b}};
  return json{{"s", std::get<std::string>(c)}};
}

inline Cell cell_from_json(const nlohmann::json& j) {
  if (j.contains("f")) {
    const auto& v = j["f"];
    if (v.is_number()) return v.get<double>();
    const std::string s = v.get<std::string>();
    if (s == "nan") return std::nan("");
    return s == "inf" ? HUGE_VAL : -HUGE_VAL;
  }
  if (j.contains("i")) return j["i"].get<long long>();
  if (j.contains("b")) return j["b"].get<bool>();
  return j.at("s").get<std::string>();
}

}  // namespace detail

inline nlohmann::json report_json(const RunReport& r) {
  using nlohmann::json;
  json j;
  j["command"] = r.command;
  j["config"] = r.config;
  j["tables"] = json::array();
  for (const auto& t : r.tables) {
    json tj;
    tj["name"] = t.name;
    tj["columns"] = t.columns;
    tj["rows"] = json::array();
    for (const auto& row : t.rows) {
      json rj = json::array();
      for (const auto& c : row) rj.push_back(detail::cell_json(c));
      tj["rows"].push_back(rj);
    }
    j["tables"].push_back(tj);
  }
  j["summary"] = json::object();
  for (const auto& [k, v] : r.summary) j["summary"][k] = detail::cell_json(v);
  j["flagged"] = r.flagged;
  j["notes"] = r.notes;
  j["timings"] = r.timings;
  return j;
}

inline std::string emit_json(const RunReport& r) { return report_json(r).dump(2) + "\n"; }

inline RunReport parse_report(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  RunReport r;
  r.command = j.at("command").get<std::string>();
  r.config = j.at("config");
  for (const auto& tj : j.at("tables")) {
    Table t;
    t.name = tj.at("name").get<std::string>();
    t.columns = tj.at("columns").get<std::vector<std::string>>();
    for (const auto& rj : tj.at("rows")) {
      std::vector<Cell> row;
      for (const auto& c : rj) row.push_back(detail::cell_from_json(c));
      t.rows.push_back(std::move(row));
    }
    r.tables.push_back(std::move(t));
  }
  for (auto it = j.at("summary").begin(); it != j.at("summary").end(); ++it) {
    r.summary[it.key()] = detail::cell_from_json(it.value());
  }
  r.flagged = j.at("flagged").get<std::vector<std::string>>();
  r.notes = j.at("notes").get<std::vector<std::string>>();
  r.timings = j.at("timings").get<std::map<std::string, double>>();
  return r;
}

inline bool same_cell(const Cell& a, const Cell& b) {
  if (a.index() != b.index()) return false;
  if (const double* x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    return (std::isnan(*x) && std::isnan(y)) || *x == y;
  }
  return a == b;
}

/// Field-for-field equality, NaN equal to NaN.
inline bool same_report(const RunReport& a, const RunReport& b) {
  if (a.command != b.command || a.config != b.config || a.flagged != b.flagged || a.notes != b.notes ||
      a.timings != b.timings || a.tables.size() != b.tables.size() || a.summary.size() != b.summary.size()) {
    return false;
  }
  for (std::size_t t = 0; t < a.tables.size(); ++t) {
    const Table &x = a.tables[t], &y = b.tables[t];
    if (x.name != y.name || x.columns != y.columns || x.rows.size() != y.rows.size()) return false;
    for (std::size_t i = 0; i < x.rows.size(); ++i) {
      if (x.rows[i].size() != y.rows[i].size()) return false;
      for (std::size_t k = 0; k < x.rows[i].size(); ++k) {
        if (!same_cell(x.rows[i][k], y.rows[i][k])) return false;
      }
    }
  }
  for (const auto& [k, v] : a.summary) {
    auto it = b.summary.find(k);
    if (it == b.summary.end() || !same_cell(v, it->second)) return false;
  }
  return true;
}

/// File names: <command>.csv for the primary table, <command>_<table>.csv for
/// the others, <command>.json for the full report.
inline std::vector<std::filesystem::path> write_report(const RunReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw OutputError("cannot write " + path.string());
    out << body;
    out.close();
    if (!out) throw OutputError("cannot write " + path.string());
    written.push_back(path);
  };
  for (std::size_t i = 0; i < r.tables.size(); ++i) {
    const std::string stem = i == 0 ? r.command : r.command + "_" + r.tables[i].name;
    put(dir / (stem + ".csv"), to_csv(r.tables[i]));
  }
  put(dir / (r.command + ".json"), emit_json(r));
  return written;
}

}  // namespace wib
