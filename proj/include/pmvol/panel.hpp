#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pmvol/csv.hpp"
#include "pmvol/date.hpp"
#include "pmvol/error.hpp"
#include "pmvol/stats.hpp"

namespace pmvol {

/// Date-indexed table of named real columns with per-cell missingness.
///
/// Dates are strictly increasing. Columns keep insertion order, which is also
/// the order used when the panel is written to disk.
class Panel {
 public:
  Panel() = default;

  explicit Panel(std::vector<Date> dates) : dates_(std::move(dates)) {
    for (std::size_t i = 1; i < dates_.size(); ++i)
      if (!(dates_[i - 1] < dates_[i])) throw ValidationError("panel dates must be strictly increasing");
  }

  [[nodiscard]] const std::vector<Date>& dates() const noexcept { return dates_; }
  [[nodiscard]] std::size_t rows() const noexcept { return dates_.size(); }
  [[nodiscard]] std::size_t cols() const noexcept { return names_.size(); }
  [[nodiscard]] bool empty() const noexcept { return dates_.empty(); }
  [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }

  [[nodiscard]] bool has(std::string_view name) const { return index_.find(std::string(name)) != index_.end(); }

  [[nodiscard]] const Column& operator[](std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ValidationError("panel has no column '" + std::string(name) + "'");
    return columns_[it->second];
  }

  /// Adds a column or replaces an existing one of the same name.
  void set(const std::string& name, Column values) {
    if (values.size() != rows())
      throw ValidationError("column '" + name + "' has " + std::to_string(values.size()) + " cells, panel has " +
                            std::to_string(rows()) + " rows");
    if (name.empty() || name.find_first_of(",:\n\r") != std::string::npos)
      throw ValidationError("invalid column name '" + name + "'");
    if (auto it = index_.find(name); it != index_.end()) {
      columns_[it->second] = std::move(values);
      return;
    }
    index_.emplace(name, names_.size());
    names_.push_back(name);
    columns_.push_back(std::move(values));
  }

  void set_cell(std::string_view name, std::size_t row, double value) {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ValidationError("panel has no column '" + std::string(name) + "'");
    columns_.at(it->second).at(row) = value;
  }

  [[nodiscard]] std::optional<std::size_t> row_of(Date d) const {
    auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
    if (it == dates_.end() || *it != d) return std::nullopt;
    return static_cast<std::size_t>(it - dates_.begin());
  }

  [[nodiscard]] std::size_t count_present(std::string_view name) const {
    const auto& c = (*this)[name];
    return static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [](double x) { return !is_missing(x); }));
  }

  /// Cell-for-cell equality, treating two missing cells as equal.
  friend bool operator==(const Panel& a, const Panel& b) {
    if (a.dates_ != b.dates_ || a.names_ != b.names_) return false;
    for (std::size_t c = 0; c < a.columns_.size(); ++c)
      for (std::size_t r = 0; r < a.rows(); ++r) {
        const double x = a.columns_[c][r], y = b.columns_[c][r];
        if (is_missing(x) != is_missing(y)) return false;
        if (!is_missing(x) && x != y) return false;
      }
    return true;
  }

 private:
  std::vector<Date> dates_;
  std::vector<std::string> names_;
  std::vector<Column> columns_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Panel files: header `date,<name>:real,...`, one row per date, empty field
// for a missing cell, doubles in shortest round-trip form.

inline void write_panel(std::ostream& out, const Panel& panel) {
  out << "date";
  for (const auto& n : panel.names()) out << ',' << n << ":real";
  out << '\n';
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    out << panel.dates()[r].iso();
    for (const auto& n : panel.names()) out << ',' << csv::format(panel[n][r]);
    out << '\n';
  }
}

inline void persist_panel(const Panel& panel, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_panel(out, panel);
  if (!out) throw IoError("write failed for '" + path + "'");
}

[[nodiscard]] inline Panel read_panel(std::istream& in, const std::string& source = "<stream>") {
  const auto table = csv::parse(in);
  if (table.header.empty()) throw SchemaError(source + ": missing panel header");
  if (table.header.front() != "date") throw SchemaError(source + ": first panel column must be 'date'");
  std::vector<std::string> names;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const auto& h = table.header[c];
    const auto colon = h.rfind(':');
    if (colon == std::string::npos) throw SchemaError(source + ": column '" + h + "' lacks a type tag");
    const auto tag = h.substr(colon + 1);
    if (tag != "real") throw SchemaError(source + ": column '" + h + "' has unknown type tag '" + tag + "'");
    names.push_back(h.substr(0, colon));
  }
  std::vector<Date> dates;
  std::vector<Column> cols(names.size());
  for (const auto& row : table.rows) {
    if (row.fields.size() != table.header.size())
      throw SchemaError(source + ": line " + std::to_string(row.line) + " has " + std::to_string(row.fields.size()) +
                        " fields, expected " + std::to_string(table.header.size()));
    try {
      dates.push_back(Date::parse(csv::trim(row.fields[0])));
      for (std::size_t c = 0; c < names.size(); ++c) cols[c].push_back(csv::parse_optional(row.fields[c + 1]));
    } catch (const ValidationError& e) {
      throw SchemaError(source + ": line " + std::to_string(row.line) + ": " + e.what());
    }
  }
  Panel p(std::move(dates));
  for (std::size_t c = 0; c < names.size(); ++c) p.set(names[c], std::move(cols[c]));
  return p;
}

[[nodiscard]] inline Panel load_panel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  return read_panel(in, path);
}

}  // namespace pmvol
