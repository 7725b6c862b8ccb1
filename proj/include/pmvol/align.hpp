#pragma once

#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pmvol/market_data.hpp"
#include "pmvol/panel.hpp"
#include "pmvol/signals.hpp"

namespace pmvol {

// Control column names in an aligned panel.
inline const std::string kVix = "vix";
inline const std::string kDxyRet = "dxy_ret";
inline const std::string kSpxRet = "spx_ret";
inline const std::string kFfChange = "ff_change";
inline const std::string kFfChangeAbs = "ff_change_abs";
inline const std::string kUst10yRet = "ust10y_ret";
inline const std::string kDvol = "dvol";

[[nodiscard]] inline std::string close_column(const std::string& asset) { return asset + ".close"; }
[[nodiscard]] inline std::string return_column(const std::string& asset) { return asset + ".ret"; }
[[nodiscard]] inline std::string signal_column(const std::string& series, std::string_view variant) {
  return series + "." + std::string(variant);
}

struct AlignOptions {
  /// Orientation of the `dir` variant per series; unlisted series use raw.
  std::map<std::string, Orientation> orientation;
};

/// Signal series for every series id found in `quotes`, in id order.
[[nodiscard]] inline std::vector<SignalSeries> build_all_signals(std::span<const ContractQuote> quotes,
                                                                 const TradingCalendar& calendar,
                                                                 const AlignOptions& options = {}) {
  std::set<std::string> ids;
  for (const auto& q : quotes) ids.insert(q.series_id);
  std::vector<SignalSeries> out;
  for (const auto& id : ids) {
    auto it = options.orientation.find(id);
    out.push_back(build_signal_series(quotes, id, calendar, it == options.orientation.end() ? Orientation::kRaw
                                                                                             : it->second));
  }
  return out;
}

/// Merges quotes, prices and controls onto the trading calendar.
///
/// One row per calendar date. Crypto log returns are taken between consecutive
/// panel dates, so a Friday-to-Monday return spans the weekend. Inputs on
/// dates outside the calendar are dropped; nothing is imputed.
[[nodiscard]] inline Panel align_panel(std::span<const ContractQuote> quotes, std::span<const PriceBar> prices,
                                       std::span<const ControlRecord> controls, const TradingCalendar& calendar,
                                       const AlignOptions& options = {}) {
  if (calendar.empty()) throw ValidationError("cannot align onto an empty calendar");
  Panel panel(calendar.dates());
  const auto n = panel.rows();
  std::size_t overlap = 0;

  std::map<std::string, Column> closes;
  for (const auto& b : prices) {
    auto& col = closes.try_emplace(b.asset_id, Column(n, kMissing)).first->second;
    if (auto r = panel.row_of(b.date)) {
      col[*r] = b.close;
      ++overlap;
    }
  }
  for (auto& [asset, col] : closes) {
    Column ret(n, kMissing);
    for (std::size_t t = 1; t < n; ++t)
      if (!is_missing(col[t]) && !is_missing(col[t - 1])) ret[t] = std::log(col[t] / col[t - 1]);
    panel.set(close_column(asset), std::move(col));
    panel.set(return_column(asset), std::move(ret));
  }

  if (!controls.empty()) {
    Column vix(n, kMissing), dxy(n, kMissing), spx(n, kMissing), ff(n, kMissing), ust(n, kMissing), dvol(n, kMissing);
    bool any_ff = false, any_ust = false, any_dvol = false;
    for (const auto& c : controls) {
      auto r = panel.row_of(c.date);
      if (!r) continue;
      ++overlap;
      vix[*r] = c.vix_level;
      dxy[*r] = c.dxy_return;
      spx[*r] = c.spx_return;
      ff[*r] = c.ff_implied_change;
      ust[*r] = c.ust10y_return;
      dvol[*r] = c.dvol_level;
      any_ff |= !is_missing(c.ff_implied_change);
      any_ust |= !is_missing(c.ust10y_return);
      any_dvol |= !is_missing(c.dvol_level);
    }
    panel.set(kVix, std::move(vix));
    panel.set(kDxyRet, std::move(dxy));
    panel.set(kSpxRet, std::move(spx));
    if (any_ff) {
      Column abs_ff(n, kMissing);
      for (std::size_t t = 0; t < n; ++t) abs_ff[t] = is_missing(ff[t]) ? kMissing : std::fabs(ff[t]);
      panel.set(kFfChange, std::move(ff));
      panel.set(kFfChangeAbs, std::move(abs_ff));
    }
    if (any_ust) panel.set(kUst10yRet, std::move(ust));
    if (any_dvol) panel.set(kDvol, std::move(dvol));
  }

  for (const auto& q : quotes)
    if (calendar.contains(q.date)) ++overlap;
  if (overlap == 0) throw ValidationError("no input record falls on a calendar date");

  const auto signals = build_all_signals(quotes, calendar, options);
  for (const auto& s : signals) {
    panel.set(signal_column(s.series_id, kVariantVw), s.vw_delta);
    panel.set(signal_column(s.series_id, kVariantAbs), s.abs_delta);
    panel.set(signal_column(s.series_id, kVariantDir), s.directional);
    panel.set(signal_column(s.series_id, kVariantEma), s.ema5);
  }
  if (!signals.empty()) panel.set(kCompositeColumn, composite_column(signals));
  return panel;
}

}  // namespace pmvol
