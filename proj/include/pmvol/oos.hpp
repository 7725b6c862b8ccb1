#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pmvol/csv.hpp"
#include "pmvol/error.hpp"
#include "pmvol/panel.hpp"
#include "pmvol/regression.hpp"
#include "pmvol/stats.hpp"

namespace pmvol {

struct ForecastRecord {
  Date date;
  std::size_t row = 0;  // panel row of the forecast origin
  double y_true = 0.0;
  double yhat_baseline = 0.0;
  double yhat_augmented = 0.0;
  double e_baseline = 0.0;   // y_true - yhat_baseline
  double e_augmented = 0.0;  // y_true - yhat_augmented
  double mean_benchmark = 0.0;
};

struct OosOptions {
  std::size_t initial = 120;
};

/// Expanding-window forecasts from a nested pair of models.
///
/// Origins are the usable rows from position `initial` onwards. At origin t
/// both models are refit on earlier usable rows whose target window has closed
/// by t (row + horizon <= t), so an h-day target never leaks into training
/// before it is fully realised. The historical-mean benchmark uses the same
/// training targets.
[[nodiscard]] inline std::vector<ForecastRecord> expanding_forecasts(const ModelSpec& baseline,
                                                                     const ModelSpec& augmented, const Panel& panel,
                                                                     const OosOptions& opt = {}) {
  if (baseline.target != augmented.target) throw ValidationError("baseline and augmented models must share the target");
  if (baseline.horizon != augmented.horizon) throw ValidationError("baseline and augmented horizons differ");
  const std::array<ModelSpec, 2> pair = {baseline, augmented};
  const auto rows = common_rows(pair, panel);
  if (rows.size() < opt.initial + 1)
    throw ValidationError("out-of-sample evaluation needs more than " + std::to_string(opt.initial) +
                          " usable rows, found " + std::to_string(rows.size()));
  const auto db = build_design(baseline, panel, rows);
  const auto da = build_design(augmented, panel, rows);
  const auto h = static_cast<std::size_t>(augmented.horizon);

  std::vector<ForecastRecord> out;
  out.reserve(rows.size() - opt.initial);
  for (std::size_t k = opt.initial; k < rows.size(); ++k) {
    const auto t = rows[k];
    // rows is sorted, so the closed-window training rows form a prefix.
    const auto train = static_cast<Eigen::Index>(
        std::partition_point(rows.begin(), rows.begin() + static_cast<long>(k),
                             [&](std::size_t r) { return r + h <= t; }) -
        rows.begin());
    if (train <= da.x.cols())
      throw ComputationError("origin " + panel.dates()[t].iso() + ": only " + std::to_string(train) +
                             " closed training rows");
    const auto fb = ols_fit(db.x.topRows(train), db.y.head(train));
    const auto fa = ols_fit(da.x.topRows(train), da.y.head(train));
    const auto i = static_cast<Eigen::Index>(k);
    ForecastRecord r;
    r.date = panel.dates()[t];
    r.row = t;
    r.y_true = da.y[i];
    r.yhat_baseline = db.x.row(i).dot(fb.coef);
    r.yhat_augmented = da.x.row(i).dot(fa.coef);
    r.e_baseline = r.y_true - r.yhat_baseline;
    r.e_augmented = r.y_true - r.yhat_augmented;
    r.mean_benchmark = da.y.head(train).mean();
    out.push_back(r);
  }
  return out;
}

[[nodiscard]] inline double msfe_ratio(std::span<const ForecastRecord> records) {
  if (records.empty()) throw ValidationError("MSFE ratio of an empty record set");
  double a = 0.0, b = 0.0;
  for (const auto& r : records) {
    a += r.e_augmented * r.e_augmented;
    b += r.e_baseline * r.e_baseline;
  }
  if (b == 0.0) throw ComputationError("baseline squared forecast errors sum to zero");
  return a / b;
}

/// 1 - SSE(augmented) / SSE(expanding historical mean).
[[nodiscard]] inline double oos_r2(std::span<const ForecastRecord> records) {
  if (records.empty()) throw ValidationError("OOS R-squared of an empty record set");
  double a = 0.0, m = 0.0;
  for (const auto& r : records) {
    a += r.e_augmented * r.e_augmented;
    m += (r.y_true - r.mean_benchmark) * (r.y_true - r.mean_benchmark);
  }
  if (m == 0.0) throw ComputationError("benchmark squared forecast errors sum to zero");
  return 1.0 - a / m;
}

/// Clark-West adjusted loss differential
///   f_t = e_b^2 - (e_a^2 - (yhat_b - yhat_a)^2).
[[nodiscard]] inline std::vector<double> clark_west_terms(std::span<const ForecastRecord> records) {
  std::vector<double> f;
  f.reserve(records.size());
  for (const auto& r : records) {
    const double d = r.yhat_baseline - r.yhat_augmented;
    f.push_back(r.e_baseline * r.e_baseline - (r.e_augmented * r.e_augmented - d * d));
  }
  return f;
}

struct ClarkWest {
  double stat = 0.0;
  double p_value = 0.5;  // one-sided, upper tail
};

inline constexpr std::size_t kMinClarkWestRecords = 30;

/// Mean of f_t over its Newey-West standard error (Bartlett lags horizon-1),
/// obtained by regressing f_t on a constant.
[[nodiscard]] inline ClarkWest clark_west(std::span<const ForecastRecord> records, int horizon) {
  if (records.size() < kMinClarkWestRecords)
    throw ValidationError("Clark-West test needs at least " + std::to_string(kMinClarkWestRecords) + " records");
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  const auto f = clark_west_terms(records);
  if (std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; })) return {0.0, 0.5};
  const auto n = static_cast<Eigen::Index>(f.size());
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, 1);
  const Eigen::VectorXd fv = Eigen::Map<const Eigen::VectorXd>(f.data(), n);
  const auto ols = ols_fit(x, fv);
  const Eigen::MatrixXd v = hac_covariance(x, ols.residuals, horizon - 1);
  const double se = std::sqrt(std::max(v(0, 0), 0.0));
  const double mean = ols.coef[0];
  ClarkWest cw;
  if (se == 0.0) {
    cw.stat = mean > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    cw.p_value = mean > 0.0 ? 0.0 : 1.0;
    return cw;
  }
  cw.stat = mean / se;
  cw.p_value = stats::upper_tail_p(cw.stat);
  return cw;
}

/// Running sum of e_b^2 - e_a^2; drifts upward while the augmented model wins.
[[nodiscard]] inline std::vector<double> cssed(std::span<const ForecastRecord> records) {
  std::vector<double> out;
  out.reserve(records.size());
  double s = 0.0;
  for (const auto& r : records) {
    s += r.e_baseline * r.e_baseline - r.e_augmented * r.e_augmented;
    out.push_back(s);
  }
  return out;
}

struct OosRun {
  std::vector<ForecastRecord> records;
  std::size_t n_oos = 0;
  double msfe_ratio = kMissing;
  double oos_r2 = kMissing;
  double cw_stat = kMissing;
  double cw_pvalue = kMissing;
  std::vector<double> cssed;
};

[[nodiscard]] inline OosRun evaluate_oos(std::vector<ForecastRecord> records, int horizon) {
  OosRun run;
  run.n_oos = records.size();
  run.msfe_ratio = msfe_ratio(records);
  run.oos_r2 = oos_r2(records);
  if (records.size() >= kMinClarkWestRecords) {
    const auto cw = clark_west(records, horizon);
    run.cw_stat = cw.stat;
    run.cw_pvalue = cw.p_value;
  }
  run.cssed = cssed(records);
  run.records = std::move(records);
  return run;
}

[[nodiscard]] inline OosRun run_oos(const ModelSpec& baseline, const ModelSpec& augmented, const Panel& panel,
                                    const OosOptions& opt = {}) {
  return evaluate_oos(expanding_forecasts(baseline, augmented, panel, opt), augmented.horizon);
}

struct OosSummaryRow {
  std::string asset;
  std::string signal;
  OosRun run;
};

inline void write_oos_summary(std::ostream& out, std::span<const OosSummaryRow> rows) {
  out << "asset,signal,n_oos,oos_r2,msfe_ratio,cw_stat,cw_p\n";
  for (const auto& r : rows)
    out << r.asset << ',' << r.signal << ',' << r.run.n_oos << ',' << csv::fixed(r.run.oos_r2, 6) << ','
        << csv::fixed(r.run.msfe_ratio, 6) << ',' << csv::fixed(r.run.cw_stat, 6) << ','
        << csv::fixed(r.run.cw_pvalue, 6) << '\n';
}

inline void write_cssed(std::ostream& out, const OosRun& run) {
  out << "date,y_true,yhat_baseline,yhat_augmented,e_baseline,e_augmented,cssed\n";
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    const auto& r = run.records[i];
    out << r.date.iso() << ',' << csv::format(r.y_true) << ',' << csv::format(r.yhat_baseline) << ','
        << csv::format(r.yhat_augmented) << ',' << csv::format(r.e_baseline) << ',' << csv::format(r.e_augmented)
        << ',' << csv::format(run.cssed[i]) << '\n';
  }
}

}  // namespace pmvol
