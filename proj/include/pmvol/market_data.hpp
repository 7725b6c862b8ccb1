#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "pmvol/csv.hpp"
#include "pmvol/date.hpp"
#include "pmvol/error.hpp"
#include "pmvol/stats.hpp"

namespace pmvol {

/// One contract's daily close. `close_prob` is the USD price of a $1 binary
/// payoff, i.e. a probability.
struct ContractQuote {
  std::string series_id;
  std::string contract_id;
  Date date;
  double close_prob = 0.0;
  double dollar_volume = 0.0;
  double open_interest = 0.0;
};

struct PriceBar {
  std::string asset_id;
  Date date;
  double close = 0.0;
};

/// Daily market controls. Optional fields hold kMissing when unobserved.
struct ControlRecord {
  Date date;
  double vix_level = kMissing;
  double dxy_return = kMissing;
  double spx_return = kMissing;
  double ff_implied_change = kMissing;
  double ust10y_return = kMissing;
  double dvol_level = kMissing;
};

/// Rows rejected during ingestion, with the source line and the reason.
struct Rejection {
  std::size_t line = 0;
  std::string record;
  std::string reason;
};

template <class Record>
struct IngestResult {
  std::vector<Record> records;
  std::vector<Rejection> rejections;
};

inline const std::vector<std::string> kQuoteColumns = {"series_id",     "contract_id", "date", "close_prob",
                                                       "dollar_volume", "open_interest"};
inline const std::vector<std::string> kPriceColumns = {"asset_id", "date", "close"};
inline const std::vector<std::string> kControlColumns = {"date",        "vix_level",         "dxy_return",
                                                         "spx_return",  "ff_implied_change", "ust10y_return",
                                                         "dvol_level"};

namespace detail {

inline void require_header(const csv::Table& t, const std::vector<std::string>& expected, const std::string& source) {
  if (t.header != expected) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw SchemaError(source + ": expected header '" + want + "'");
  }
}

inline std::string join(const std::vector<std::string>& f) {
  std::string s;
  for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "," : "") + f[i];
  return s;
}

inline std::string require_id(const std::string& field, const char* what) {
  auto id = csv::trim(field);
  if (id.empty()) throw ValidationError(std::string("empty ") + what);
  return id;
}

/// Runs `parse_row` over every data row; ValidationError marks the row
/// rejected instead of aborting the ingest.
template <class Record, class Parse>
IngestResult<Record> ingest_rows(const csv::Table& t, std::size_t width, Parse parse_row) {
  IngestResult<Record> out;
  for (const auto& row : t.rows) {
    try {
      if (row.fields.size() != width)
        throw ValidationError("expected " + std::to_string(width) + " fields, found " +
                              std::to_string(row.fields.size()));
      out.records.push_back(parse_row(row.fields));
    } catch (const ValidationError& e) {
      out.rejections.push_back(Rejection{row.line, join(row.fields), e.what()});
    }
  }
  return out;
}

inline std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  return in;
}

}  // namespace detail

[[nodiscard]] inline IngestResult<ContractQuote> ingest_contract_quotes(std::istream& in,
                                                                        const std::string& source = "<stream>") {
  const auto t = csv::parse(in);
  detail::require_header(t, kQuoteColumns, source);
  std::set<std::tuple<std::string, std::string, Date>> seen;
  return detail::ingest_rows<ContractQuote>(t, kQuoteColumns.size(), [&](const std::vector<std::string>& f) {
    ContractQuote q;
    q.series_id = detail::require_id(f[0], "series_id");
    q.contract_id = detail::require_id(f[1], "contract_id");
    q.date = Date::parse(csv::trim(f[2]));
    q.close_prob = csv::parse_double(f[3]);
    q.dollar_volume = csv::parse_double(f[4]);
    q.open_interest = csv::parse_double(f[5]);
    if (q.close_prob < 0.0 || q.close_prob > 1.0) throw ValidationError("close_prob outside [0,1]");
    if (q.dollar_volume < 0.0) throw ValidationError("negative dollar_volume");
    if (q.open_interest < 0.0) throw ValidationError("negative open_interest");
    if (!seen.emplace(q.series_id, q.contract_id, q.date).second)
      throw ValidationError("duplicate (series_id, contract_id, date)");
    return q;
  });
}

[[nodiscard]] inline IngestResult<ContractQuote> ingest_contract_quotes(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return ingest_contract_quotes(in, path);
}

[[nodiscard]] inline IngestResult<PriceBar> ingest_prices(std::istream& in, const std::string& source = "<stream>") {
  const auto t = csv::parse(in);
  detail::require_header(t, kPriceColumns, source);
  std::set<std::pair<std::string, Date>> seen;
  return detail::ingest_rows<PriceBar>(t, kPriceColumns.size(), [&](const std::vector<std::string>& f) {
    PriceBar b;
    b.asset_id = detail::require_id(f[0], "asset_id");
    b.date = Date::parse(csv::trim(f[1]));
    b.close = csv::parse_double(f[2]);
    if (!(b.close > 0.0)) throw ValidationError("close must be positive");
    if (!seen.emplace(b.asset_id, b.date).second) throw ValidationError("duplicate (asset_id, date)");
    return b;
  });
}

[[nodiscard]] inline IngestResult<PriceBar> ingest_prices(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return ingest_prices(in, path);
}

[[nodiscard]] inline IngestResult<ControlRecord> ingest_controls(std::istream& in,
                                                                 const std::string& source = "<stream>") {
  const auto t = csv::parse(in);
  detail::require_header(t, kControlColumns, source);
  std::set<Date> seen;
  return detail::ingest_rows<ControlRecord>(t, kControlColumns.size(), [&](const std::vector<std::string>& f) {
    ControlRecord c;
    c.date = Date::parse(csv::trim(f[0]));
    c.vix_level = csv::parse_optional(f[1]);
    c.dxy_return = csv::parse_optional(f[2]);
    c.spx_return = csv::parse_optional(f[3]);
    c.ff_implied_change = csv::parse_optional(f[4]);
    c.ust10y_return = csv::parse_optional(f[5]);
    c.dvol_level = csv::parse_optional(f[6]);
    if (!is_missing(c.vix_level) && !(c.vix_level > 0.0)) throw ValidationError("vix_level must be positive");
    if (!seen.insert(c.date).second) throw ValidationError("duplicate date");
    return c;
  });
}

[[nodiscard]] inline IngestResult<ControlRecord> ingest_controls(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return ingest_controls(in, path);
}

inline void write_quotes(std::ostream& out, const std::vector<ContractQuote>& quotes) {
  out << detail::join(kQuoteColumns) << '\n';
  for (const auto& q : quotes)
    out << q.series_id << ',' << q.contract_id << ',' << q.date.iso() << ',' << csv::format(q.close_prob) << ','
        << csv::format(q.dollar_volume) << ',' << csv::format(q.open_interest) << '\n';
}

inline void write_prices(std::ostream& out, const std::vector<PriceBar>& bars) {
  out << detail::join(kPriceColumns) << '\n';
  for (const auto& b : bars) out << b.asset_id << ',' << b.date.iso() << ',' << csv::format(b.close) << '\n';
}

inline void write_controls(std::ostream& out, const std::vector<ControlRecord>& controls) {
  out << detail::join(kControlColumns) << '\n';
  for (const auto& c : controls)
    out << c.date.iso() << ',' << csv::format(c.vix_level) << ',' << csv::format(c.dxy_return) << ','
        << csv::format(c.spx_return) << ',' << csv::format(c.ff_implied_change) << ','
        << csv::format(c.ust10y_return) << ',' << csv::format(c.dvol_level) << '\n';
}

/// Ordered set of trading dates: weekdays minus configured holidays.
class TradingCalendar {
 public:
  TradingCalendar() = default;
  explicit TradingCalendar(std::vector<Date> dates) : dates_(std::move(dates)) {
    for (std::size_t i = 0; i < dates_.size(); ++i) {
      if (dates_[i].is_weekend()) throw ValidationError("calendar contains weekend date " + dates_[i].iso());
      if (i > 0 && !(dates_[i - 1] < dates_[i])) throw ValidationError("calendar dates must be strictly increasing");
    }
  }

  [[nodiscard]] const std::vector<Date>& dates() const noexcept { return dates_; }
  [[nodiscard]] std::size_t size() const noexcept { return dates_.size(); }
  [[nodiscard]] bool empty() const noexcept { return dates_.empty(); }
  [[nodiscard]] bool contains(Date d) const { return std::binary_search(dates_.begin(), dates_.end(), d); }

 private:
  std::vector<Date> dates_;
};

[[nodiscard]] inline TradingCalendar build_calendar(Date start, Date end, const std::vector<Date>& holidays) {
  if (end < start) throw ValidationError("calendar start " + start.iso() + " is after end " + end.iso());
  const std::set<Date> skip(holidays.begin(), holidays.end());
  std::vector<Date> out;
  for (Date d = start; d <= end; d = d.plus_days(1))
    if (!d.is_weekend() && !skip.contains(d)) out.push_back(d);
  return TradingCalendar(std::move(out));
}

/// Holiday files hold one ISO date per line; `#` starts a comment.
[[nodiscard]] inline std::vector<Date> read_holidays(std::istream& in) {
  std::vector<Date> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = csv::trim(line);
    if (!t.empty()) out.push_back(Date::parse(t));
  }
  return out;
}

[[nodiscard]] inline std::vector<Date> load_holidays(const std::string& path) {
  auto in = detail::open_or_throw(path);
  return read_holidays(in);
}

}  // namespace pmvol
