#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "isac/errors.hpp"

namespace isac {

using Cell = std::variant<std::string, double, long long>;

/// Homogeneous result rows. A column named "flag" picks up the null markers in JSON.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw BoundsError(ErrorCode::invalid_argument, "row width mismatch");
    rows.push_back(std::move(row));
  }
};

enum class Format { csv, json };

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace table_detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string cell_text(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  return std::to_string(std::get<long long>(c));
}

}  // namespace table_detail

inline void write_csv(const Table& t, std::ostream& out) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << table_detail::csv_field(t.columns[i]);
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << table_detail::csv_field(table_detail::cell_text(row[i]));
    }
    out << '\n';
  }
}

/// Array of records. Non-finite numbers become null and are named in the record's flag.
inline nlohmann::json to_json(const Table& t) {
  using nlohmann::json;
  json arr = json::array();
  for (const auto& row : t.rows) {
    json rec = json::object();
    std::string extra;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const auto& col = t.columns[i];
      if (const auto* s = std::get_if<std::string>(&row[i])) {
        rec[col] = *s;
      } else if (const auto* n = std::get_if<long long>(&row[i])) {
        rec[col] = *n;
      } else {
        const double d = std::get<double>(row[i]);
        if (std::isfinite(d)) {
          // round to what CSV would show
          rec[col] = std::stod(format_number(d));
        } else {
          rec[col] = nullptr;
          if (!extra.empty()) extra += ';';
          extra += col + "=" + format_number(d);
        }
      }
    }
    if (!extra.empty()) {
      std::string flag = rec.contains("flag") && rec["flag"].is_string() ? rec["flag"].get<std::string>() : "";
      rec["flag"] = flag.empty() ? extra : flag + ";" + extra;
    }
    arr.push_back(std::move(rec));
  }
  return arr;
}

inline void write_table(const Table& t, Format f, std::ostream& out) {
  if (f == Format::csv) {
    write_csv(t, out);
  } else {
    out << to_json(t).dump(2) << '\n';
  }
}

/// Writes to `path`, or to `fallback` when the path is empty or "-".
inline void emit_table(const Table& t, Format f, const std::string& path, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    write_table(t, f, fallback);
    return;
  }
  std::ofstream out(path);
  if (!out) throw BoundsError(ErrorCode::io_error, "cannot open '" + path + "' for writing");
  write_table(t, f, out);
  out.flush();
  if (!out) throw BoundsError(ErrorCode::io_error, "write to '" + path + "' failed");
}

}  // namespace isac
