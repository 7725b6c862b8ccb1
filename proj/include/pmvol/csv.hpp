#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pmvol/error.hpp"
#include "pmvol/stats.hpp"

namespace pmvol::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
};

[[nodiscard]] inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

[[nodiscard]] inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Parses CSV text with a header row. Fields are not quoted; blank lines are
/// skipped.
[[nodiscard]] inline Table parse(std::istream& in) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      if (trim(line).empty()) continue;
      t.header = split(line);
      for (auto& h : t.header) h = trim(h);
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    t.rows.push_back(Row{lineno, split(line)});
  }
  return t;
}

[[nodiscard]] inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  return parse(in);
}

[[nodiscard]] inline double parse_double(std::string_view s) {
  const std::string t = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || p != t.data() + t.size() || !std::isfinite(v))
    throw ValidationError("not a number: '" + std::string(s) + "'");
  return v;
}

/// Empty field means missing.
[[nodiscard]] inline double parse_optional(std::string_view s) {
  if (trim(s).empty()) return kMissing;
  return parse_double(s);
}

/// Shortest representation that round-trips exactly; empty for missing.
[[nodiscard]] inline std::string format(double v) {
  if (is_missing(v)) return {};
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

/// Fixed-point rendering for human-facing tables.
[[nodiscard]] inline std::string fixed(double v, int decimals) {
  if (is_missing(v)) return {};
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, decimals);
  std::string s(buf, p);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

}  // namespace pmvol::csv
