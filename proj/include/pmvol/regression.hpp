#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pmvol/align.hpp"
#include "pmvol/csv.hpp"
#include "pmvol/error.hpp"
#include "pmvol/panel.hpp"
#include "pmvol/stats.hpp"
#include "pmvol/volatility.hpp"

namespace pmvol {

// ---------------------------------------------------------------------------
// Least squares and sandwich covariances
// ---------------------------------------------------------------------------

struct OlsResult {
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
};

/// Least squares by column-pivoted QR. `x` must already contain the constant.
[[nodiscard]] inline OlsResult ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto k = static_cast<std::size_t>(x.cols());
  if (static_cast<std::size_t>(y.size()) != n) throw ValidationError("design and target lengths differ");
  if (n <= k)
    throw ComputationError("need more observations than regressors (n=" + std::to_string(n) +
                           ", k=" + std::to_string(k) + ")");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (static_cast<std::size_t>(qr.rank()) < k)
    throw ComputationError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                           std::to_string(k) + ")");
  OlsResult r;
  r.n = n;
  r.k = k;
  r.coef = qr.solve(y);
  r.residuals = y - x * r.coef;
  const double ssr = r.residuals.squaredNorm();
  const double sst = (y.array() - y.mean()).matrix().squaredNorm();
  r.r2 = sst > 0.0 ? 1.0 - ssr / sst : (ssr == 0.0 ? 1.0 : 0.0);
  r.adj_r2 = 1.0 - (1.0 - r.r2) * static_cast<double>(n - 1) / static_cast<double>(n - k);
  return r;
}

/// Whether sandwich estimators are scaled by n / (n - k).
enum class SmallSample { kNone, kDof };

namespace detail {

inline Eigen::MatrixXd bread(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd xtx = x.transpose() * x;
  return xtx.ldlt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
}

inline Eigen::MatrixXd sandwich(const Eigen::MatrixXd& b, const Eigen::MatrixXd& meat, double scale) {
  Eigen::MatrixXd v = scale * (b * meat * b);
  return 0.5 * (v + v.transpose());
}

inline double dof_scale(SmallSample s, Eigen::Index n, Eigen::Index k) {
  return s == SmallSample::kDof ? static_cast<double>(n) / static_cast<double>(n - k) : 1.0;
}

inline void check_shapes(const Eigen::MatrixXd& x, const Eigen::VectorXd& e) {
  if (x.rows() != e.size()) throw ValidationError("design and residual lengths differ");
  if (x.rows() <= x.cols()) throw ComputationError("need more observations than regressors");
}

}  // namespace detail

/// White heteroskedasticity-robust covariance.
[[nodiscard]] inline Eigen::MatrixXd hc0_covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& e,
                                                    SmallSample ss = SmallSample::kDof) {
  detail::check_shapes(x, e);
  const Eigen::VectorXd e2 = e.array().square();
  const Eigen::MatrixXd meat = x.transpose() * e2.asDiagonal() * x;
  return detail::sandwich(detail::bread(x), meat, detail::dof_scale(ss, x.rows(), x.cols()));
}

/// Newey-West covariance with Bartlett weights 1 - l/(L+1), l = 0..L.
[[nodiscard]] inline Eigen::MatrixXd hac_covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& e, int lags,
                                                    SmallSample ss = SmallSample::kDof) {
  detail::check_shapes(x, e);
  if (lags < 0) throw ValidationError("HAC lags must be non-negative");
  if (lags >= x.rows()) throw ValidationError("HAC lags must be smaller than the sample size");
  const Eigen::MatrixXd z = x.array().colwise() * e.array();  // row t is x_t * e_t
  Eigen::MatrixXd meat = z.transpose() * z;
  const auto n = z.rows();
  for (int l = 1; l <= lags; ++l) {
    const double w = 1.0 - static_cast<double>(l) / (lags + 1.0);
    const Eigen::MatrixXd gamma = z.bottomRows(n - l).transpose() * z.topRows(n - l);
    meat += w * (gamma + gamma.transpose());
  }
  return detail::sandwich(detail::bread(x), meat, detail::dof_scale(ss, x.rows(), x.cols()));
}

/// MacKinnon-White HC3: squared residuals inflated by (1 - h_i)^-2.
[[nodiscard]] inline Eigen::MatrixXd hc3_covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& e) {
  detail::check_shapes(x, e);
  const Eigen::MatrixXd b = detail::bread(x);
  Eigen::VectorXd w(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double h = x.row(i) * b * x.row(i).transpose();
    if (h >= 1.0 - 1e-10) throw ComputationError("HC3 undefined: observation " + std::to_string(i) + " has leverage 1");
    w[i] = e[i] * e[i] / ((1.0 - h) * (1.0 - h));
  }
  const Eigen::MatrixXd meat = x.transpose() * w.asDiagonal() * x;
  return detail::sandwich(b, meat, 1.0);
}

// ---------------------------------------------------------------------------
// Model specifications over a panel
// ---------------------------------------------------------------------------

/// A regressor column read at row t - lag. Positive lags look back (lag 1 is
/// the one-day lagged signal); negative lags look forward (lead placebos).
struct Regressor {
  std::string column;
  int lag = 0;

  [[nodiscard]] std::string label() const {
    if (lag == 0) return column;
    return (lag > 0 ? "L" + std::to_string(lag) : "F" + std::to_string(-lag)) + "." + column;
  }
};

struct HacCovariance {
  int lags = 5;
};
struct Hc3Covariance {};
using CovarianceSpec = std::variant<HacCovariance, Hc3Covariance>;

struct ModelSpec {
  std::string name;
  std::string target;
  std::vector<Regressor> regressors;  // constant is implied
  CovarianceSpec covariance = HacCovariance{5};
  /// Number of future days the target spans; the out-of-sample trainer only
  /// uses rows whose target window has closed.
  int horizon = 5;
  /// Rows where any of these columns is non-zero are dropped.
  std::vector<std::string> exclude_when;
  /// Keep every stride-th row of the estimation sample (non-overlapping windows).
  std::size_t stride = 1;

  void validate() const {
    if (target.empty()) throw ValidationError("model spec has no target");
    for (std::size_t i = 0; i < regressors.size(); ++i)
      for (std::size_t j = i + 1; j < regressors.size(); ++j)
        if (regressors[i].label() == regressors[j].label())
          throw ValidationError("duplicate regressor '" + regressors[i].label() + "'");
    if (const auto* h = std::get_if<HacCovariance>(&covariance); h && h->lags < 0)
      throw ValidationError("HAC lags must be non-negative");
    if (stride == 0) throw ValidationError("stride must be positive");
    if (horizon < 1) throw ValidationError("horizon must be >= 1");
  }
};

inline const std::string kConstTerm = "const";

[[nodiscard]] inline double lagged(const Column& c, std::size_t row, int lag) {
  const auto src = static_cast<long>(row) - lag;
  if (src < 0 || src >= static_cast<long>(c.size())) return kMissing;
  return c[static_cast<std::size_t>(src)];
}

/// Panel rows usable by `spec`: target and every regressor present, no
/// exclusion flag set, thinned by the stride.
[[nodiscard]] inline std::vector<std::size_t> estimation_rows(const ModelSpec& spec, const Panel& panel) {
  spec.validate();
  const Column& y = panel[spec.target];
  std::vector<const Column*> cols;
  for (const auto& r : spec.regressors) cols.push_back(&panel[r.column]);
  std::vector<const Column*> flags;
  for (const auto& f : spec.exclude_when) flags.push_back(&panel[f]);
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < panel.rows(); ++t) {
    if (is_missing(y[t])) continue;
    bool ok = true;
    for (std::size_t j = 0; ok && j < cols.size(); ++j) ok = !is_missing(lagged(*cols[j], t, spec.regressors[j].lag));
    for (const auto* f : flags) ok = ok && !((*f)[t] != 0.0 && !is_missing((*f)[t]));
    if (ok) rows.push_back(t);
  }
  if (spec.stride > 1 && !rows.empty()) {
    const auto first = rows.front();
    std::erase_if(rows, [&](std::size_t t) { return (t - first) % spec.stride != 0; });
  }
  return rows;
}

/// Rows usable by every spec in the list.
[[nodiscard]] inline std::vector<std::size_t> common_rows(std::span<const ModelSpec> specs, const Panel& panel) {
  if (specs.empty()) return {};
  auto rows = estimation_rows(specs.front(), panel);
  for (std::size_t s = 1; s < specs.size(); ++s) {
    const auto other = estimation_rows(specs[s], panel);
    std::vector<std::size_t> merged;
    std::set_intersection(rows.begin(), rows.end(), other.begin(), other.end(), std::back_inserter(merged));
    rows = std::move(merged);
  }
  return rows;
}

struct Design {
  std::vector<std::string> terms;
  std::vector<std::size_t> rows;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

[[nodiscard]] inline Design build_design(const ModelSpec& spec, const Panel& panel, std::span<const std::size_t> rows) {
  Design d;
  d.terms.push_back(kConstTerm);
  for (const auto& r : spec.regressors) d.terms.push_back(r.label());
  d.rows.assign(rows.begin(), rows.end());
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto k = static_cast<Eigen::Index>(d.terms.size());
  d.x.resize(n, k);
  d.y.resize(n);
  const Column& y = panel[spec.target];
  std::vector<const Column*> cols;
  for (const auto& r : spec.regressors) cols.push_back(&panel[r.column]);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto t = rows[static_cast<std::size_t>(i)];
    d.y[i] = y[t];
    d.x(i, 0) = 1.0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const double v = lagged(*cols[j], t, spec.regressors[j].lag);
      if (is_missing(v))
        throw ValidationError("row " + panel.dates()[t].iso() + " lacks '" + spec.regressors[j].label() + "'");
      d.x(i, static_cast<Eigen::Index>(j + 1)) = v;
    }
    if (is_missing(d.y[i])) throw ValidationError("row " + panel.dates()[t].iso() + " lacks target");
  }
  return d;
}

struct ModelFit {
  std::string name;
  std::vector<std::string> terms;
  Eigen::VectorXd coef;
  Eigen::MatrixXd cov;
  Eigen::VectorXd se;
  Eigen::VectorXd t_stats;
  Eigen::VectorXd p_values;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  std::size_t n_obs = 0;
  Eigen::VectorXd residuals;
  std::vector<std::size_t> rows;  // panel rows in the estimation sample
  Eigen::MatrixXd x;
  Eigen::VectorXd y;

  [[nodiscard]] bool has(std::string_view term) const {
    return std::find(terms.begin(), terms.end(), term) != terms.end();
  }
  [[nodiscard]] Eigen::Index index_of(std::string_view term) const {
    auto it = std::find(terms.begin(), terms.end(), term);
    if (it == terms.end()) throw ValidationError("fit '" + name + "' has no term '" + std::string(term) + "'");
    return it - terms.begin();
  }
  [[nodiscard]] double coefficient(std::string_view term) const { return coef[index_of(term)]; }
  [[nodiscard]] double std_error(std::string_view term) const { return se[index_of(term)]; }
  [[nodiscard]] double t_stat(std::string_view term) const { return t_stats[index_of(term)]; }
  [[nodiscard]] double p_value(std::string_view term) const { return p_values[index_of(term)]; }
};

[[nodiscard]] inline Eigen::MatrixXd covariance_for(const CovarianceSpec& spec, const Eigen::MatrixXd& x,
                                                    const Eigen::VectorXd& e) {
  if (const auto* h = std::get_if<HacCovariance>(&spec)) return hac_covariance(x, e, h->lags);
  return hc3_covariance(x, e);
}

[[nodiscard]] inline ModelFit fit_design(std::string name, Design d, const CovarianceSpec& cov) {
  if (d.rows.empty()) throw ComputationError("model '" + name + "': empty estimation sample");
  const auto ols = ols_fit(d.x, d.y);
  ModelFit f;
  f.name = std::move(name);
  f.terms = std::move(d.terms);
  f.coef = ols.coef;
  f.cov = covariance_for(cov, d.x, ols.residuals);
  f.se = f.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  f.t_stats = f.coef.cwiseQuotient(f.se);
  f.p_values.resize(f.coef.size());
  for (Eigen::Index i = 0; i < f.coef.size(); ++i) f.p_values[i] = stats::two_sided_p(f.t_stats[i]);
  f.r2 = ols.r2;
  f.adj_r2 = ols.adj_r2;
  f.n_obs = ols.n;
  f.residuals = ols.residuals;
  f.rows = std::move(d.rows);
  f.x = std::move(d.x);
  f.y = std::move(d.y);
  return f;
}

[[nodiscard]] inline ModelFit estimate(const ModelSpec& spec, const Panel& panel, std::span<const std::size_t> rows) {
  return fit_design(spec.name.empty() ? spec.target : spec.name, build_design(spec, panel, rows), spec.covariance);
}

/// Least-squares fit of `spec` on its listwise-complete sample.
[[nodiscard]] inline ModelFit estimate(const ModelSpec& spec, const Panel& panel) {
  const auto rows = estimation_rows(spec, panel);
  return estimate(spec, panel, rows);
}

/// Fits each spec on the intersection sample so R-squared values compare.
[[nodiscard]] inline std::vector<ModelFit> estimate_nested(std::span<const ModelSpec> specs, const Panel& panel) {
  const auto rows = common_rows(specs, panel);
  std::vector<ModelFit> out;
  for (const auto& s : specs) out.push_back(estimate(s, panel, rows));
  return out;
}

// ---------------------------------------------------------------------------
// The HAR / controls / signal ladder
// ---------------------------------------------------------------------------

struct LadderOptions {
  std::vector<std::string> controls = {kVix, kDxyRet, kSpxRet};
  int horizon = 5;
  int hac_lags = 5;
  /// Target column; defaults to rvol_column(asset, horizon).
  std::string target;
};

[[nodiscard]] inline std::string ladder_target(const std::string& asset, const LadderOptions& o) {
  return o.target.empty() ? rvol_column(asset, o.horizon) : o.target;
}

/// M1: HAR components only.
[[nodiscard]] inline ModelSpec har_spec(const std::string& asset, const LadderOptions& o = {}) {
  ModelSpec s;
  s.name = "M1";
  s.target = ladder_target(asset, o);
  s.regressors = {{har_column(asset, 1), 0}, {har_column(asset, 5), 0}, {har_column(asset, 20), 0}};
  s.covariance = HacCovariance{o.hac_lags};
  s.horizon = o.horizon;
  return s;
}

/// M2: HAR plus same-day market controls.
[[nodiscard]] inline ModelSpec controls_spec(const std::string& asset, const LadderOptions& o = {}) {
  auto s = har_spec(asset, o);
  s.name = "M2";
  for (const auto& c : o.controls) s.regressors.push_back({c, 0});
  return s;
}

/// M3: M2 plus the signal observed one day earlier.
[[nodiscard]] inline ModelSpec signal_spec(const std::string& asset, const std::string& signal,
                                           const LadderOptions& o = {}) {
  auto s = controls_spec(asset, o);
  s.name = "M3";
  s.regressors.push_back({signal, 1});
  return s;
}

[[nodiscard]] inline std::array<ModelSpec, 3> model_ladder(const std::string& asset, const std::string& signal,
                                                           const LadderOptions& o = {}) {
  return {har_spec(asset, o), controls_spec(asset, o), signal_spec(asset, signal, o)};
}

/// Term label of a signal entering at lag 1.
[[nodiscard]] inline std::string lagged_term(const std::string& column, int lag = 1) {
  return Regressor{column, lag}.label();
}

// ---------------------------------------------------------------------------
// Effect sizes, horizon profile, release windows
// ---------------------------------------------------------------------------

[[nodiscard]] inline double effect_size(double coefficient, double low_value, double high_value) {
  return coefficient * (high_value - low_value);
}

/// Coefficient times the spread between two quantiles of the regressor's
/// in-sample distribution (the interquartile range by default).
[[nodiscard]] inline double effect_size(const ModelFit& fit, std::string_view term, double q_lo = 0.25,
                                        double q_hi = 0.75) {
  const auto j = fit.index_of(term);
  std::vector<double> xs(fit.x.col(j).data(), fit.x.col(j).data() + fit.x.rows());
  return effect_size(fit.coef[j], stats::quantile(xs, q_lo), stats::quantile(xs, q_hi));
}

struct HorizonResult {
  int horizon = 0;
  ModelFit fit;
};

/// Refits `base` for each horizon h with target rvol_column(asset, h)
/// (|r[t+1]| for h = 1) and HAC lags min(h, 5).
[[nodiscard]] inline std::vector<HorizonResult> horizon_sweep(const ModelSpec& base, const std::string& asset,
                                                              const Panel& panel, std::span<const int> horizons) {
  std::vector<HorizonResult> out;
  for (int h : horizons) {
    auto spec = base;
    spec.target = rvol_column(asset, h);
    spec.horizon = h;
    spec.covariance = HacCovariance{std::min(h, 5)};
    spec.name = base.name + "@h" + std::to_string(h);
    out.push_back({h, estimate(spec, panel)});
  }
  return out;
}

/// 1 within +-half_width panel rows of each event date, 0 elsewhere. Events on
/// non-trading days map to the next panel date.
[[nodiscard]] inline Column release_window_dummy(const std::vector<Date>& dates, std::span<const Date> events,
                                                 int half_width = 1) {
  Column out(dates.size(), 0.0);
  for (const auto& e : events) {
    auto it = std::lower_bound(dates.begin(), dates.end(), e);
    if (it == dates.end()) continue;
    const long c = it - dates.begin();
    for (long i = c - half_width; i <= c + half_width; ++i)
      if (i >= 0 && i < static_cast<long>(dates.size())) out[static_cast<std::size_t>(i)] = 1.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coefficient table output
// ---------------------------------------------------------------------------

/// Nested-model table: one row per term, one column per model, cells
/// `estimate<stars>(se)`; closing rows for adjusted R-squared and N.
inline void write_model_table(std::ostream& out, std::span<const ModelFit> fits) {
  std::vector<std::string> terms;
  for (const auto& f : fits)
    for (const auto& t : f.terms)
      if (t != kConstTerm && std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
  terms.push_back(kConstTerm);
  out << "term";
  for (const auto& f : fits) out << ',' << f.name;
  out << '\n';
  for (const auto& t : terms) {
    out << t;
    for (const auto& f : fits) {
      out << ',';
      if (f.has(t))
        out << csv::fixed(f.coefficient(t), 4) << stats::stars(f.p_value(t)) << '(' << csv::fixed(f.std_error(t), 4)
            << ')';
    }
    out << '\n';
  }
  out << "adj_r2";
  for (const auto& f : fits) out << ',' << csv::fixed(f.adj_r2, 4);
  out << "\nn";
  for (const auto& f : fits) out << ',' << f.n_obs;
  out << '\n';
}

}  // namespace pmvol
