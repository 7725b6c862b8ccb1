#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pmvol/csv.hpp"
#include "pmvol/error.hpp"
#include "pmvol/panel.hpp"
#include "pmvol/parallel.hpp"
#include "pmvol/regression.hpp"
#include "pmvol/rng.hpp"
#include "pmvol/signals.hpp"
#include "pmvol/stats.hpp"

namespace pmvol {

// ---------------------------------------------------------------------------
// Benjamini-Hochberg
// ---------------------------------------------------------------------------

struct BhResult {
  std::vector<double> adjusted;  // in input order
  std::vector<bool> rejected;    // in input order
  std::size_t n_rejected = 0;
};

/// Step-up FDR control: rejects the k* smallest p-values where
/// k* = max{k : p_(k) <= k q / m}. Adjusted p_(k) = min_{j>=k} m p_(j) / j,
/// capped at 1.
[[nodiscard]] inline BhResult benjamini_hochberg(std::span<const double> p, double q) {
  if (p.empty()) throw ValidationError("Benjamini-Hochberg needs at least one p-value");
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("FDR level q must lie in (0,1)");
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("p-value outside [0,1]");
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  std::size_t kstar = 0;
  for (std::size_t k = 1; k <= m; ++k)
    if (p[order[k - 1]] <= static_cast<double>(k) * q / static_cast<double>(m)) kstar = k;

  BhResult r;
  r.adjusted.assign(m, 1.0);
  r.rejected.assign(m, false);
  double running = 1.0;
  for (std::size_t k = m; k >= 1; --k) {
    const auto i = order[k - 1];
    running = std::min(running, static_cast<double>(m) * p[i] / static_cast<double>(k));
    r.adjusted[i] = std::min(running, 1.0);
    if (k <= kstar) r.rejected[i] = true;
  }
  r.n_rejected = kstar;
  return r;
}

// ---------------------------------------------------------------------------
// Moving-block bootstrap
// ---------------------------------------------------------------------------

struct BootstrapOptions {
  std::size_t block_length = 5;
  std::size_t n_resamples = 2000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct BootstrapResult {
  double point_estimate = 0.0;
  std::vector<double> distribution;
  double p_value = 0.0;
  std::uint64_t seed = 0;
  std::size_t block_length = 0;
  std::size_t redraws = 0;  // rank-deficient resamples that were redrawn

  friend bool operator==(const BootstrapResult&, const BootstrapResult&) = default;
};

/// Row indices for one resample: ceil(n / len) blocks of `len` consecutive
/// rows, starts drawn uniformly from the n - len + 1 overlapping blocks, and
/// the concatenation truncated to n rows.
[[nodiscard]] inline std::vector<std::size_t> block_resample_indices(std::size_t n, std::size_t len, Rng& rng) {
  if (len == 0 || len > n) throw ValidationError("block length must lie in [1, n]");
  std::vector<std::size_t> idx;
  idx.reserve(n + len);
  const std::size_t starts = n - len + 1;
  while (idx.size() < n) {
    const auto s = static_cast<std::size_t>(rng.below(starts));
    for (std::size_t j = 0; j < len; ++j) idx.push_back(s + j);
  }
  idx.resize(n);
  return idx;
}

/// Pairs block bootstrap of one coefficient: whole design rows (target and
/// regressors together) are resampled and the model refit by least squares.
/// The p-value is the share of resamples with |b* - b| >= |b|, a recentred
/// two-sided test of b = 0. Resample i draws from stream (seed, i), so the
/// result does not depend on the thread count.
[[nodiscard]] inline BootstrapResult moving_block_bootstrap(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                            Eigen::Index coef_index, const BootstrapOptions& opt) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw ValidationError("bootstrap needs a non-empty estimation sample");
  if (opt.block_length == 0 || opt.block_length > n) throw ValidationError("block length must lie in [1, n]");
  if (coef_index < 0 || coef_index >= x.cols()) throw ValidationError("coefficient index out of range");
  BootstrapResult r;
  r.seed = opt.seed;
  r.block_length = opt.block_length;
  r.point_estimate = ols_fit(x, y).coef[coef_index];
  r.distribution.assign(opt.n_resamples, 0.0);
  std::vector<std::size_t> redraws(opt.n_resamples, 0);
  constexpr std::size_t kMaxRedraws = 100;

  parallel_for(opt.n_resamples, opt.threads, [&](std::size_t b) {
    auto rng = Rng::stream(opt.seed, b);
    Eigen::MatrixXd xb(x.rows(), x.cols());
    Eigen::VectorXd yb(y.size());
    for (std::size_t attempt = 0;; ++attempt) {
      const auto idx = block_resample_indices(n, opt.block_length, rng);
      for (std::size_t i = 0; i < n; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
        yb[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(idx[i])];
      }
      try {
        r.distribution[b] = ols_fit(xb, yb).coef[coef_index];
        redraws[b] = attempt;
        return;
      } catch (const ComputationError&) {
        if (attempt + 1 >= kMaxRedraws) throw ComputationError("bootstrap resample repeatedly rank deficient");
      }
    }
  });

  std::size_t extreme = 0;
  for (double c : r.distribution)
    if (std::fabs(c - r.point_estimate) >= std::fabs(r.point_estimate)) ++extreme;
  r.p_value = opt.n_resamples ? static_cast<double>(extreme) / static_cast<double>(opt.n_resamples) : kMissing;
  r.redraws = std::accumulate(redraws.begin(), redraws.end(), std::size_t{0});
  return r;
}

[[nodiscard]] inline BootstrapResult moving_block_bootstrap(const ModelSpec& spec, const Panel& panel,
                                                            std::string_view term, const BootstrapOptions& opt) {
  const auto rows = estimation_rows(spec, panel);
  const auto d = build_design(spec, panel, rows);
  auto it = std::find(d.terms.begin(), d.terms.end(), term);
  if (it == d.terms.end()) throw ValidationError("bootstrap: model has no term '" + std::string(term) + "'");
  return moving_block_bootstrap(d.x, d.y, it - d.terms.begin(), opt);
}

// ---------------------------------------------------------------------------
// Orthogonalisation
// ---------------------------------------------------------------------------

struct OrthogonalizedSignal {
  Column residual;  // aligned to panel rows; missing outside the overlap sample
  double r2 = 0.0;  // first-stage R-squared
  std::size_t n = 0;
};

/// Residual of a same-day regression of `signal` on a constant and
/// `controls`, over rows where all are present.
[[nodiscard]] inline OrthogonalizedSignal orthogonalize(const Panel& panel, const std::string& signal,
                                                        std::span<const std::string> controls) {
  ModelSpec first;
  first.name = "first-stage";
  first.target = signal;
  for (const auto& c : controls) first.regressors.push_back({c, 0});
  first.horizon = 1;
  const auto rows = estimation_rows(first, panel);
  const auto d = build_design(first, panel, rows);
  if (d.rows.empty()) throw ComputationError("orthogonalize: signal and controls never overlap");
  const auto ols = ols_fit(d.x, d.y);
  OrthogonalizedSignal out;
  out.residual.assign(panel.rows(), kMissing);
  for (std::size_t i = 0; i < d.rows.size(); ++i) out.residual[d.rows[i]] = ols.residuals[static_cast<Eigen::Index>(i)];
  out.r2 = ols.r2;
  out.n = ols.n;
  return out;
}

// ---------------------------------------------------------------------------
// Lead-lag placebo
// ---------------------------------------------------------------------------

struct LeadLagResult {
  ModelFit lagged;  // signal at t-1
  ModelFit lead;    // signal at t+1
  std::string lagged_term;
  std::string lead_term;
};

/// Fits `spec` twice, once with `signal` at lag 1 and once at lead 1. Any
/// existing entry of `signal` in the spec is replaced. Each fit uses its own
/// listwise-complete sample.
[[nodiscard]] inline LeadLagResult lead_lag_test(const ModelSpec& spec, const std::string& signal, const Panel& panel) {
  auto with_offset = [&](int lag) {
    auto s = spec;
    std::erase_if(s.regressors, [&](const Regressor& r) { return r.column == signal; });
    s.regressors.push_back({signal, lag});
    s.name = spec.name + (lag > 0 ? "-lag" : "-lead");
    return s;
  };
  LeadLagResult r;
  r.lagged = estimate(with_offset(1), panel);
  r.lead = estimate(with_offset(-1), panel);
  r.lagged_term = lagged_term(signal, 1);
  r.lead_term = lagged_term(signal, -1);
  return r;
}

// ---------------------------------------------------------------------------
// Specification variants
// ---------------------------------------------------------------------------

/// Non-overlapping h-day windows (every h-th row) with HC3 errors.
[[nodiscard]] inline ModelSpec non_overlapping(ModelSpec spec) {
  spec.stride = static_cast<std::size_t>(spec.horizon);
  spec.covariance = Hc3Covariance{};
  spec.name += "-nonoverlap";
  return spec;
}

/// `spec` with extra regressors appended.
[[nodiscard]] inline ModelSpec augmented(ModelSpec spec, std::span<const Regressor> extra, std::string name) {
  for (const auto& r : extra) spec.regressors.push_back(r);
  spec.name = std::move(name);
  return spec;
}

/// `spec` with the target replaced (alternative volatility measures).
[[nodiscard]] inline ModelSpec retargeted(ModelSpec spec, std::string target, int horizon, std::string name) {
  spec.target = std::move(target);
  spec.horizon = horizon;
  spec.name = std::move(name);
  return spec;
}

// ---------------------------------------------------------------------------
// Signal x asset grid
// ---------------------------------------------------------------------------

struct GridCell {
  std::string signal_id;
  std::string asset_id;
  bool active = false;
  std::size_t coverage = 0;
  std::size_t n = 0;
  double coefficient = kMissing;
  double t_stat = kMissing;
  double p_value = kMissing;
  double adj_r2 = kMissing;
  double bh_adjusted_p = kMissing;
  bool bh_rejected = false;
  std::string note;
};

struct GridOptions {
  LadderOptions ladder;
  double q = 0.05;
  std::size_t min_coverage = kDefaultMinCoverage;
  std::size_t threads = 1;
};

/// One M3 fit per (signal, asset) pair. Pairs whose coverage is below the
/// threshold, or whose fit fails, are recorded inactive. BH runs across the
/// active cells. Rows come out signal-major in the given order.
[[nodiscard]] inline std::vector<GridCell> run_grid(std::span<const std::string> signals,
                                                    std::span<const std::string> assets, const Panel& panel,
                                                    const GridOptions& opt = {}) {
  std::vector<GridCell> cells(signals.size() * assets.size());
  parallel_for(cells.size(), opt.threads, [&](std::size_t i) {
    auto& c = cells[i];
    c.signal_id = signals[i / assets.size()];
    c.asset_id = assets[i % assets.size()];
    c.coverage = usable_observations(panel[c.signal_id], panel[return_column(c.asset_id)]);
    if (c.coverage < opt.min_coverage) {
      c.note = "coverage " + std::to_string(c.coverage) + " below " + std::to_string(opt.min_coverage);
      return;
    }
    try {
      const auto fit = estimate(signal_spec(c.asset_id, c.signal_id, opt.ladder), panel);
      const auto term = lagged_term(c.signal_id);
      c.active = true;
      c.n = fit.n_obs;
      c.coefficient = fit.coefficient(term);
      c.t_stat = fit.t_stat(term);
      c.p_value = fit.p_value(term);
      c.adj_r2 = fit.adj_r2;
    } catch (const ComputationError& e) {
      c.note = e.what();
    }
  });
  std::vector<double> ps;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i].active) {
      ps.push_back(cells[i].p_value);
      where.push_back(i);
    }
  if (!ps.empty()) {
    const auto bh = benjamini_hochberg(ps, opt.q);
    for (std::size_t j = 0; j < where.size(); ++j) {
      cells[where[j]].bh_adjusted_p = bh.adjusted[j];
      cells[where[j]].bh_rejected = bh.rejected[j];
    }
  }
  return cells;
}

/// Assets x signals matrix of t-statistics with stars; "-" marks inactive.
inline void write_grid_matrix(std::ostream& out, std::span<const GridCell> cells, std::span<const std::string> signals,
                              std::span<const std::string> assets) {
  out << "asset";
  for (const auto& s : signals) out << ',' << s;
  out << '\n';
  for (const auto& a : assets) {
    out << a;
    for (const auto& s : signals) {
      auto it = std::find_if(cells.begin(), cells.end(),
                             [&](const GridCell& c) { return c.asset_id == a && c.signal_id == s; });
      out << ',';
      if (it == cells.end() || !it->active)
        out << '-';
      else
        out << csv::fixed(it->t_stat, 2) << stats::stars(it->p_value);
    }
    out << '\n';
  }
}

inline void write_grid_long(std::ostream& out, std::span<const GridCell> cells) {
  out << "signal,asset,active,coverage,n,coefficient,t_stat,p_value,adj_r2,bh_adjusted_p,bh_rejected\n";
  for (const auto& c : cells)
    out << c.signal_id << ',' << c.asset_id << ',' << (c.active ? 1 : 0) << ',' << c.coverage << ',' << c.n << ','
        << csv::fixed(c.coefficient, 6) << ',' << csv::fixed(c.t_stat, 4) << ',' << csv::fixed(c.p_value, 6) << ','
        << csv::fixed(c.adj_r2, 4) << ',' << csv::fixed(c.bh_adjusted_p, 6) << ',' << (c.bh_rejected ? 1 : 0)
        << '\n';
}

}  // namespace pmvol
