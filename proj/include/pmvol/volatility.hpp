#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pmvol/align.hpp"
#include "pmvol/error.hpp"
#include "pmvol/garch.hpp"
#include "pmvol/panel.hpp"
#include "pmvol/stats.hpp"

namespace pmvol {

inline const double kTradingYear = std::sqrt(252.0);
inline const double kCalendarYear = std::sqrt(365.0);

/// Annualised sample standard deviation (n-1 denominator) of the h returns
/// after row t, i.e. r[t+1..t+h]. Missing when any of them is missing or the
/// window runs past the end.
[[nodiscard]] inline double realized_vol(std::span<const double> returns, std::size_t t, int h,
                                         double annualization = kTradingYear) {
  if (h < 2) throw ValidationError("realized_vol needs h >= 2; use abs_return_target for h = 1");
  const auto hh = static_cast<std::size_t>(h);
  if (t + hh >= returns.size()) return kMissing;
  const auto window = returns.subspan(t + 1, hh);
  for (double r : window)
    if (is_missing(r)) return kMissing;
  return annualization * stats::sample_sd(window);
}

/// |r[t+1]|, missing at the last row or when the return is missing.
[[nodiscard]] inline double abs_return_target(std::span<const double> returns, std::size_t t) {
  if (t + 1 >= returns.size() || is_missing(returns[t + 1])) return kMissing;
  return std::fabs(returns[t + 1]);
}

[[nodiscard]] inline double log_rvol(double rvol, double epsilon = 0.001) {
  if (is_missing(rvol)) return kMissing;
  if (rvol < 0.0) throw ValidationError("log_rvol of negative volatility");
  return std::log(rvol + epsilon);
}

/// HAR components observable on row t: they use returns through t-1 only.
struct HarRegressors {
  double lag1 = kMissing;    // |r[t-1]|
  double mean5 = kMissing;   // mean |r| over t-5..t-1
  double mean20 = kMissing;  // mean |r| over t-20..t-1
};

[[nodiscard]] inline HarRegressors har_regressors(std::span<const double> returns, std::size_t t) {
  HarRegressors out;
  if (t > returns.size() || t < 20) return out;
  double s5 = 0.0, s20 = 0.0;
  for (std::size_t k = 1; k <= 20; ++k) {
    const double r = returns[t - k];
    if (is_missing(r)) return out;
    s20 += std::fabs(r);
    if (k <= 5) s5 += std::fabs(r);
  }
  out.lag1 = std::fabs(returns[t - 1]);
  out.mean5 = s5 / 5.0;
  out.mean20 = s20 / 20.0;
  return out;
}

[[nodiscard]] inline Column realized_vol_column(std::span<const double> returns, int h,
                                                double annualization = kTradingYear) {
  Column out(returns.size(), kMissing);
  for (std::size_t t = 0; t < returns.size(); ++t) out[t] = realized_vol(returns, t, h, annualization);
  return out;
}

[[nodiscard]] inline Column abs_return_column(std::span<const double> returns) {
  Column out(returns.size(), kMissing);
  for (std::size_t t = 0; t < returns.size(); ++t) out[t] = abs_return_target(returns, t);
  return out;
}

// Column names for volatility targets and regressors.
[[nodiscard]] inline std::string rvol_column(const std::string& asset, int h) {
  return h == 1 ? asset + ".absret1" : asset + ".rvol" + std::to_string(h);
}
[[nodiscard]] inline std::string logrvol_column(const std::string& asset) { return asset + ".logrvol5"; }
[[nodiscard]] inline std::string garchvar_column(const std::string& asset) { return asset + ".garchvar"; }
[[nodiscard]] inline std::string har_column(const std::string& asset, int window) {
  return asset + ".har" + std::to_string(window);
}

/// Adds the three HAR regressor columns for `asset`.
inline void add_har_columns(Panel& panel, const std::string& asset) {
  const auto& r = panel[return_column(asset)];
  Column d(r.size(), kMissing), w(r.size(), kMissing), m(r.size(), kMissing);
  for (std::size_t t = 0; t < r.size(); ++t) {
    const auto h = har_regressors(r, t);
    d[t] = h.lag1;
    w[t] = h.mean5;
    m[t] = h.mean20;
  }
  panel.set(har_column(asset, 1), std::move(d));
  panel.set(har_column(asset, 5), std::move(w));
  panel.set(har_column(asset, 20), std::move(m));
}

/// Conditional variance for t+1 given information through t, from a GARCH(1,1)
/// fit over the asset's observed returns. Missing-return rows are skipped by
/// the recursion and stay missing in the output.
[[nodiscard]] inline Column garch_variance_column(std::span<const double> returns, const GarchOptions& opt = {}) {
  std::vector<double> obs;
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < returns.size(); ++t)
    if (!is_missing(returns[t])) {
      obs.push_back(returns[t]);
      rows.push_back(t);
    }
  const auto fit = garch11_fit(obs, opt);
  const auto s2 = garch11_variance(fit, obs);
  Column out(returns.size(), kMissing);
  for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]] = s2[i + 1];
  return out;
}

struct VolatilityOptions {
  std::vector<int> horizons = {1, 3, 5, 10, 21};
  double annualization = kTradingYear;
  bool garch = false;
};

/// Adds targets `{asset}.rvol{h}` / `{asset}.absret1`, `{asset}.logrvol5`,
/// the HAR regressors and optionally `{asset}.garchvar`.
inline void add_volatility_columns(Panel& panel, const std::string& asset, const VolatilityOptions& opt = {}) {
  const Column r = panel[return_column(asset)];
  bool have5 = false;
  for (int h : opt.horizons) {
    if (h < 1) throw ValidationError("horizon must be >= 1");
    panel.set(rvol_column(asset, h), h == 1 ? abs_return_column(r) : realized_vol_column(r, h, opt.annualization));
    have5 |= h == 5;
  }
  const Column rv5 = have5 ? panel[rvol_column(asset, 5)] : realized_vol_column(r, 5, opt.annualization);
  Column lrv(rv5.size(), kMissing);
  for (std::size_t t = 0; t < rv5.size(); ++t) lrv[t] = log_rvol(rv5[t]);
  panel.set(logrvol_column(asset), std::move(lrv));
  add_har_columns(panel, asset);
  if (opt.garch) panel.set(garchvar_column(asset), garch_variance_column(r));
}

}  // namespace pmvol
