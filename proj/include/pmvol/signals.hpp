#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pmvol/error.hpp"
#include "pmvol/market_data.hpp"
#include "pmvol/stats.hpp"

namespace pmvol {

/// Sign convention applied to the volume-weighted delta. `kDovish` flips the
/// sign so that a fall in the probability of higher rates reads positive.
enum class Orientation { kRaw, kDovish };

[[nodiscard]] inline Orientation parse_orientation(std::string_view tag) {
  if (tag == "raw") return Orientation::kRaw;
  if (tag == "dovish" || tag == "inverted") return Orientation::kDovish;
  throw ValidationError("unknown orientation '" + std::string(tag) + "' (expected raw|dovish|inverted)");
}

[[nodiscard]] inline double directional_signal(double vw_delta, Orientation o) {
  if (is_missing(vw_delta)) return kMissing;
  return o == Orientation::kDovish ? -vw_delta : vw_delta;
}

/// Daily signal variants for one series, aligned to the trading calendar.
struct SignalSeries {
  std::string series_id;
  std::vector<Date> dates;
  Column vw_delta;
  Column abs_delta;
  Column directional;
  Column ema5;
};

/// Variant names used for panel columns `{series_id}.{variant}`.
inline constexpr std::string_view kVariantVw = "vw";
inline constexpr std::string_view kVariantAbs = "abs";
inline constexpr std::string_view kVariantDir = "dir";
inline constexpr std::string_view kVariantEma = "ema5";
inline const std::string kCompositeColumn = "kalshi.composite";

/// Per-contract closes for one series, restricted to calendar dates.
///
/// A contract is active on calendar day t when it has a close on both t-1 and
/// t. Contracts that are newly listed or already expired are excluded, and
/// no stale price is ever carried forward.
class SeriesBook {
 public:
  SeriesBook(std::string series_id, std::span<const ContractQuote> quotes, const TradingCalendar& calendar)
      : series_id_(std::move(series_id)), dates_(calendar.dates()) {
    std::map<std::string, std::size_t> ids;
    for (const auto& q : quotes) {
      if (q.series_id != series_id_) continue;
      auto it = std::lower_bound(dates_.begin(), dates_.end(), q.date);
      if (it == dates_.end() || *it != q.date) continue;  // off-calendar quote
      auto [pos, inserted] = ids.emplace(q.contract_id, closes_.size());
      if (inserted) {
        contract_ids_.push_back(q.contract_id);
        closes_.emplace_back();
      }
      closes_[pos->second][static_cast<std::size_t>(it - dates_.begin())] = Close{q.close_prob, q.dollar_volume};
    }
  }

  [[nodiscard]] const std::string& series_id() const noexcept { return series_id_; }
  [[nodiscard]] const std::vector<Date>& dates() const noexcept { return dates_; }
  [[nodiscard]] bool has_quotes() const noexcept { return !closes_.empty(); }

  [[nodiscard]] std::vector<std::string> active_set(std::size_t t) const {
    std::vector<std::string> out;
    if (t == 0 || t >= dates_.size()) return out;
    for (std::size_t c = 0; c < closes_.size(); ++c)
      if (closes_[c].contains(t) && closes_[c].contains(t - 1)) out.push_back(contract_ids_[c]);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Sum of V*dp over sum of V across the active set; missing when the set is
  /// empty or nothing traded.
  [[nodiscard]] double volume_weighted_delta(std::size_t t) const {
    if (t == 0 || t >= dates_.size()) return kMissing;
    double num = 0.0, den = 0.0;
    for (const auto& book : closes_) {
      auto now = book.find(t);
      auto prev = book.find(t - 1);
      if (now == book.end() || prev == book.end()) continue;
      num += now->second.volume * (now->second.prob - prev->second.prob);
      den += now->second.volume;
    }
    if (!(den > 0.0)) return kMissing;
    return num / den;
  }

 private:
  struct Close {
    double prob;
    double volume;
  };
  std::string series_id_;
  std::vector<Date> dates_;
  std::vector<std::string> contract_ids_;
  std::vector<std::unordered_map<std::size_t, Close>> closes_;
};

[[nodiscard]] inline std::vector<std::string> active_set(std::span<const ContractQuote> quotes,
                                                         const std::string& series_id,
                                                         const TradingCalendar& calendar, Date date) {
  const SeriesBook book(series_id, quotes, calendar);
  auto it = std::lower_bound(calendar.dates().begin(), calendar.dates().end(), date);
  if (it == calendar.dates().end() || *it != date) return {};
  return book.active_set(static_cast<std::size_t>(it - calendar.dates().begin()));
}

[[nodiscard]] inline double volume_weighted_delta(std::span<const ContractQuote> quotes, const std::string& series_id,
                                                  const TradingCalendar& calendar, Date date) {
  const SeriesBook book(series_id, quotes, calendar);
  auto it = std::lower_bound(calendar.dates().begin(), calendar.dates().end(), date);
  if (it == calendar.dates().end() || *it != date) return kMissing;
  return book.volume_weighted_delta(static_cast<std::size_t>(it - calendar.dates().begin()));
}

/// Exponential moving average with smoothing 2/(span+1). The first observed
/// value seeds the recursion; missing days neither update the state nor
/// receive a value.
[[nodiscard]] inline Column ema_signal(std::span<const double> series, int span = 5) {
  if (span < 1) throw ValidationError("EMA span must be at least 1");
  const double a = 2.0 / (span + 1.0);
  Column out(series.size(), kMissing);
  bool seeded = false;
  double state = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (is_missing(series[i])) continue;
    state = seeded ? a * series[i] + (1.0 - a) * state : series[i];
    seeded = true;
    out[i] = state;
  }
  return out;
}

[[nodiscard]] inline SignalSeries build_signal_series(const SeriesBook& book, Orientation orientation) {
  SignalSeries s;
  s.series_id = book.series_id();
  s.dates = book.dates();
  const auto n = s.dates.size();
  s.vw_delta.assign(n, kMissing);
  s.abs_delta.assign(n, kMissing);
  s.directional.assign(n, kMissing);
  for (std::size_t t = 0; t < n; ++t) {
    const double d = book.volume_weighted_delta(t);
    s.vw_delta[t] = d;
    s.abs_delta[t] = is_missing(d) ? kMissing : std::fabs(d);
    s.directional[t] = directional_signal(d, orientation);
  }
  s.ema5 = ema_signal(s.abs_delta, 5);
  return s;
}

[[nodiscard]] inline SignalSeries build_signal_series(std::span<const ContractQuote> quotes,
                                                      const std::string& series_id, const TradingCalendar& calendar,
                                                      Orientation orientation = Orientation::kRaw) {
  return build_signal_series(SeriesBook(series_id, quotes, calendar), orientation);
}

/// Unweighted mean of |delta| across series observed on row t.
[[nodiscard]] inline double composite_signal(std::span<const SignalSeries> all, std::size_t t) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : all) {
    if (t < s.abs_delta.size() && !is_missing(s.abs_delta[t])) {
      sum += s.abs_delta[t];
      ++n;
    }
  }
  return n == 0 ? kMissing : sum / static_cast<double>(n);
}

[[nodiscard]] inline Column composite_column(std::span<const SignalSeries> all) {
  std::size_t n = 0;
  for (const auto& s : all) n = std::max(n, s.abs_delta.size());
  Column out(n, kMissing);
  for (std::size_t t = 0; t < n; ++t) out[t] = composite_signal(all, t);
  return out;
}

struct CoverageRow {
  std::string series_id;
  std::size_t usable = 0;
  std::string first_active;  // "YYYY-Qn" or "Never active"
  bool excluded = false;
};

inline constexpr std::size_t kDefaultMinCoverage = 50;

/// Rows t whose lagged signal (row t-1) and crypto return (row t) are both
/// present.
[[nodiscard]] inline std::size_t usable_observations(std::span<const double> signal, std::span<const double> returns) {
  std::size_t n = 0;
  for (std::size_t t = 1; t < std::min(signal.size() + 1, returns.size()); ++t)
    if (!is_missing(signal[t - 1]) && !is_missing(returns[t])) ++n;
  return n;
}

/// Usable-observation counts per series (see usable_observations). Series
/// below `min_coverage` are flagged excluded.
[[nodiscard]] inline std::vector<CoverageRow> coverage_report(std::span<const SignalSeries> all,
                                                              std::span<const double> returns,
                                                              std::size_t min_coverage = kDefaultMinCoverage) {
  std::vector<CoverageRow> out;
  for (const auto& s : all) {
    CoverageRow row{s.series_id, 0, "Never active", false};
    for (std::size_t t = 0; t < s.abs_delta.size(); ++t)
      if (!is_missing(s.abs_delta[t])) {
        row.first_active = std::to_string(s.dates[t].year()) + "-Q" + std::to_string(s.dates[t].quarter());
        break;
      }
    row.usable = usable_observations(s.abs_delta, returns);
    row.excluded = row.usable < min_coverage;
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace pmvol
