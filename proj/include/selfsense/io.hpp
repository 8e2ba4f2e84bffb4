#pragma once

// CSV datasets, JSON parameter files and fit reports, atomic file output.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "selfsense/errors.hpp"
#include "selfsense/ident.hpp"
#include "selfsense/model.hpp"

namespace selfsense::io {

using json = nlohmann::ordered_json;

/// Locale-independent fixed-precision text. 12 significant digits sit far
/// below every sensor noise floor and keep files byte-stable across runs.
inline std::string fmt(double v, int digits = 12) {
  if (v == 0.0) return "0";  // folds -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Write via a sibling temp file and rename, so readers never see a partial file.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + tmp.string() + "' for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_number(std::string_view field, std::size_t line, std::string_view column) {
  double v = 0.0;
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end)
    throw ParseError("column '" + std::string(column) + "': not a number: '" + std::string(field) + "'",
                     line);
  return v;
}

}  // namespace detail

/// Parses `t,P,L[,F][,x]` plus any further named columns (kept in `extra`).
/// Column order is free; names are case-sensitive.
inline ident::Dataset parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t nl = text.find('\n', start);
      lines.push_back(text.substr(start, nl == std::string_view::npos ? text.npos : nl - start));
      if (nl == std::string_view::npos) break;
      start = nl + 1;
    }
  }
  std::size_t header_line = 0;
  while (header_line < lines.size() && detail::trim(lines[header_line]).empty()) ++header_line;
  if (header_line == lines.size()) throw ParseError("empty CSV, no header", 1);

  std::string_view head = lines[header_line];
  if (head.size() >= 3 && head.substr(0, 3) == "\xEF\xBB\xBF") head.remove_prefix(3);  // BOM
  const auto names = detail::split(head);
  int it = -1, iP = -1, iL = -1, iF = -1, ix = -1;
  std::vector<std::pair<std::size_t, std::string>> extras;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string_view n = names[i];
    if (n.empty()) throw ParseError("empty column name", header_line + 1);
    int* slot = n == "t" ? &it : n == "P" ? &iP : n == "L" ? &iL : n == "F" ? &iF : n == "x" ? &ix : nullptr;
    if (slot) {
      if (*slot >= 0) throw ParseError("duplicate column '" + std::string(n) + "'", header_line + 1);
      *slot = static_cast<int>(i);
    } else {
      for (const auto& e : extras)
        if (e.second == n) throw ParseError("duplicate column '" + std::string(n) + "'", header_line + 1);
      extras.emplace_back(i, std::string(n));
    }
  }
  if (it < 0) throw MissingColumnError("t");
  if (iP < 0) throw MissingColumnError("P");
  if (iL < 0) throw MissingColumnError("L");

  ident::Dataset ds;
  for (const auto& e : extras) ds.extra[e.second];
  for (std::size_t li = header_line + 1; li < lines.size(); ++li) {
    const std::string_view raw = lines[li];
    if (detail::trim(raw).empty()) continue;
    const std::size_t lineno = li + 1;
    const auto f = detail::split(raw);
    if (f.size() != names.size())
      throw ParseError("expected " + std::to_string(names.size()) + " fields, found " +
                           std::to_string(f.size()),
                       lineno);
    ident::Sample s;
    s.t = detail::parse_number(f[it], lineno, "t");
    s.P = detail::parse_number(f[iP], lineno, "P");
    s.L = detail::parse_number(f[iL], lineno, "L");
    if (iF >= 0) s.F = detail::parse_number(f[iF], lineno, "F");
    if (ix >= 0) s.x = detail::parse_number(f[ix], lineno, "x");
    for (const auto& e : extras) ds.extra[e.second].push_back(detail::parse_number(f[e.first], lineno, e.second));
    ds.samples.push_back(s);
  }
  if (ds.samples.empty()) throw ParseError("CSV has a header but no data rows", header_line + 1);
  return ds;
}

inline ident::Dataset read_csv(const std::filesystem::path& path) {
  try {
    return parse_csv(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.reason(), e.line(), path.string());
  }
}

/// Header `t,P,L[,F][,x]` then `extra` channels in name order.
inline std::string to_csv(const ident::Dataset& ds) {
  const bool F = ds.has_force(), x = ds.has_length();
  std::string out = "t,P,L";
  if (F) out += ",F";
  if (x) out += ",x";
  for (const auto& [name, _] : ds.extra) out += "," + name;
  out += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.samples[i];
    out += fmt(s.t) + ',' + fmt(s.P) + ',' + fmt(s.L);
    if (F) out += ',' + fmt(*s.F);
    if (x) out += ',' + fmt(*s.x);
    for (const auto& [_, v] : ds.extra) out += ',' + fmt(v[i]);
    out += '\n';
  }
  return out;
}

/// Generic numeric table: named columns of equal length.
struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  void add(std::string name, std::vector<double> values) {
    if (!columns.empty() && values.size() != columns.front().size())
      throw Error("table column '" + name + "' has a different length");
    names.push_back(std::move(name));
    columns.push_back(std::move(values));
  }

  std::string to_csv() const {
    std::string out;
    for (std::size_t j = 0; j < names.size(); ++j) out += (j ? "," : "") + names[j];
    out += '\n';
    const std::size_t n = columns.empty() ? 0 : columns.front().size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < columns.size(); ++j) out += (j ? "," : "") + fmt(columns[j][i]);
      out += '\n';
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const model::DynamicParams& d) { return {{"k", d.k}, {"x0", d.x0}, {"c", d.c}}; }

inline json to_json(const model::InductanceParams& p) {
  json arr = json::array();
  for (double v : p.p) arr.push_back(v);
  return {{"p", arr}};
}

namespace detail {

inline double number_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  if (!j[key].is_number()) throw ConfigError(where + ": field '" + key + "' must be a number");
  return j[key].get<double>();
}

}  // namespace detail

inline model::DynamicParams dynamic_from_json(const json& j, const std::string& where = "dynamic parameters") {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  model::DynamicParams d;
  d.k = detail::number_field(j, "k", where);
  d.x0 = detail::number_field(j, "x0", where);
  d.c = detail::number_field(j, "c", where);
  d.validate();
  return d;
}

inline model::InductanceParams inductance_from_json(const json& j,
                                                    const std::string& where = "inductance parameters") {
  if (!j.is_object() || !j.contains("p")) throw ConfigError(where + ": missing field 'p'");
  const json& a = j["p"];
  if (!a.is_array() || a.size() != 10) throw ConfigError(where + ": 'p' must hold exactly 10 numbers");
  model::InductanceParams p;
  for (std::size_t i = 0; i < 10; ++i) {
    if (!a[i].is_number()) throw ConfigError(where + ": 'p' must hold exactly 10 numbers");
    p.p[i] = a[i].get<double>();
  }
  p.validate();
  return p;
}

inline json parse_json(std::string_view text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline json read_json(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot open '" + path.string() + "'");
  }
  return parse_json(text, path.string());
}

/// Stable text: two-space indent, trailing newline.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json iteration_log_json(const std::vector<opt::IterationRecord>& log) {
  json arr = json::array();
  for (const auto& r : log)
    arr.push_back({{"iteration", r.iteration},
                   {"cost", r.cost},
                   {"step_norm", r.step_norm},
                   {"radius", r.radius},
                   {"ratio", r.ratio},
                   {"accepted", r.accepted}});
  return arr;
}

template <class Params>
json report_json(const ident::FitReport<Params>& r) {
  json j = {{"params", to_json(r.params)},
            {"rmse", r.rmse},
            {"r2", r.r2},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"cost", r.cost},
            {"best_start", r.best_start},
            {"status", r.status}};
  j["log"] = iteration_log_json(r.log);
  return j;
}

inline json stats_json(const ident::ErrorStats& s) {
  return {{"rmse", s.rmse}, {"mae", s.mae}, {"max_abs", s.max_abs}, {"mean", s.mean}};
}

inline json goodness_json(const ident::Goodness& g) {
  return {{"rmse", g.rmse}, {"mae", g.mae}, {"r2", g.r2}, {"nrmse_percent", g.nrmse}};
}

}  // namespace selfsense::io
