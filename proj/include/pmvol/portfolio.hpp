#pragma once

#include <algorithm>
#include <ostream>
#include <span>
#include <vector>

#include "pmvol/csv.hpp"
#include "pmvol/date.hpp"
#include "pmvol/error.hpp"
#include "pmvol/stats.hpp"

namespace pmvol {

inline constexpr double kDefaultWeightCap = 2.0;

struct WeightSeries {
  std::vector<Date> dates;
  Column sigma_hat;
  Column weight;
  double sigma_bar = 0.0;
  double cap = kDefaultWeightCap;
};

/// w_t = min(sigma_bar / sigma_hat_t, cap). Missing forecasts give missing
/// weights; a zero forecast takes the cap.
[[nodiscard]] inline WeightSeries vol_managed_weights(std::span<const double> forecasts, double sigma_bar,
                                                      double cap = kDefaultWeightCap) {
  if (!(sigma_bar > 0.0)) throw ValidationError("sigma_bar must be positive");
  if (!(cap > 0.0)) throw ValidationError("weight cap must be positive");
  WeightSeries w;
  w.sigma_bar = sigma_bar;
  w.cap = cap;
  w.sigma_hat.assign(forecasts.begin(), forecasts.end());
  w.weight.assign(forecasts.size(), kMissing);
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    const double s = forecasts[i];
    if (is_missing(s)) continue;
    if (s < 0.0) throw ValidationError("volatility forecasts must be non-negative");
    w.weight[i] = s == 0.0 ? cap : std::min(sigma_bar / s, cap);
  }
  return w;
}

[[nodiscard]] inline WeightSeries vol_managed_weights(const std::vector<Date>& dates,
                                                      std::span<const double> forecasts, double sigma_bar,
                                                      double cap = kDefaultWeightCap) {
  if (dates.size() != forecasts.size()) throw ValidationError("dates and forecasts differ in length");
  auto w = vol_managed_weights(forecasts, sigma_bar, cap);
  w.dates = dates;
  return w;
}

/// Default volatility target: mean of the present realised volatilities.
[[nodiscard]] inline double default_sigma_bar(std::span<const double> realized) {
  const auto xs = stats::present(realized);
  if (xs.empty()) throw ComputationError("no realised volatility for the default target");
  const double m = stats::mean(xs);
  if (!(m > 0.0)) throw ComputationError("no positive realised volatility for the default target");
  return m;
}

struct RvGap {
  double absolute = 0.0;  // benchmark - model
  double relative = 0.0;  // absolute / benchmark
};

[[nodiscard]] inline RvGap predicted_rv_gap(double model, double benchmark) {
  if (is_missing(model) || is_missing(benchmark)) throw ValidationError("both forecasts must be present");
  if (!(benchmark > 0.0)) throw ValidationError("benchmark forecast must be positive");
  const double a = benchmark - model;
  return {a, a / benchmark};
}

inline void write_weights(std::ostream& out, const WeightSeries& w) {
  if (w.dates.size() != w.weight.size()) throw ValidationError("weight series has no dates");
  out << "date,sigma_hat,weight\n";
  for (std::size_t i = 0; i < w.dates.size(); ++i)
    out << w.dates[i].iso() << ',' << csv::format(w.sigma_hat[i]) << ',' << csv::format(w.weight[i]) << '\n';
}

}  // namespace pmvol
