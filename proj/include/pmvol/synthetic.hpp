#pragma once

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <tuple>
#include <string>
#include <vector>

#include "pmvol/align.hpp"
#include "pmvol/csv.hpp"
#include "pmvol/error.hpp"
#include "pmvol/market_data.hpp"
#include "pmvol/panel.hpp"
#include "pmvol/rng.hpp"
#include "pmvol/signals.hpp"
#include "pmvol/volatility.hpp"

namespace pmvol {

/// A planted linear effect of a lagged signal column on an asset's target.
struct Injection {
  std::string asset;
  std::string signal;  // panel column, e.g. "KXFED.dir"
  double coefficient = 0.0;
};

struct SeriesSetup {
  std::string id;
  Orientation orientation = Orientation::kRaw;
  long first_row = 0;   // first panel row with listed contracts
  long last_row = -1;   // -1: through the end of the panel
};

struct SyntheticConfig {
  std::uint64_t seed = 20260316;
  std::size_t n_days = 344;
  Date start{2023, 1, 2};
  std::vector<std::string> assets = {"BTC"};

  // Target: intercept + HAR + controls + injected signals + MA(q) noise.
  double intercept = 0.32;
  double beta_daily = 0.5;
  double beta_weekly = 6.0;
  double beta_monthly = 0.0;
  double gamma_vix = 0.005;
  double gamma_dxy = 4.885;
  double gamma_spx = -2.859;
  double noise_sd = 0.15;
  int noise_ma_order = 4;
  double vol_floor = 0.05;
  std::vector<Injection> injections = {{"BTC", "KXFED.dir", 0.639}};

  // Prediction-market signal process.
  std::vector<SeriesSetup> series = {{"KXFED", Orientation::kDovish, 0, -1}};
  double signal_scale = 0.017;        // sd of the common daily repricing
  double event_variance_ratio = 5.0;  // variance multiplier on event days
  unsigned event_day_of_month = 12;   // 0 disables events
  std::size_t contracts_per_series = 3;
  std::size_t contract_life = 60;
  double idiosyncratic_scale = 0.2;   // contract noise as a share of signal_scale

  // Controls.
  double vix_mean = 18.0;
  double vix_persistence = 0.95;
  double vix_shock_sd = 1.0;
  double dxy_sd = 0.004;
  double spx_sd = 0.01;
  double ff_sd = 0.01;
  double ust_sd = 0.005;
  double dvol_mean = 55.0;

  // Stand-alone GARCH(1,1) return paths.
  double garch_omega = 1e-6;
  double garch_alpha = 0.08;
  double garch_beta = 0.90;

  void validate() const {
    if (n_days < 30) throw ValidationError("synthetic n_days must be at least 30");
    if (assets.empty()) throw ValidationError("synthetic config needs at least one asset");
    if (noise_sd < 0.0 || signal_scale < 0.0) throw ValidationError("scales must be non-negative");
    if (noise_ma_order < 0) throw ValidationError("noise_ma_order must be non-negative");
    if (event_variance_ratio <= 0.0) throw ValidationError("event_variance_ratio must be positive");
    if (contracts_per_series == 0 || contract_life < 2) throw ValidationError("invalid contract lifecycle");
    if (!(garch_omega > 0.0) || garch_alpha < 0.0 || garch_beta < 0.0 || garch_alpha + garch_beta >= 1.0)
      throw ValidationError("GARCH parameters must satisfy omega>0, alpha,beta>=0, alpha+beta<1");
    for (const auto& inj : injections)
      if (std::find(assets.begin(), assets.end(), inj.asset) == assets.end())
        throw ValidationError("injection targets unknown asset '" + inj.asset + "'");
  }
};

/// Raw records in the market-data schema.
struct RawData {
  std::vector<ContractQuote> quotes;
  std::vector<PriceBar> prices;
  std::vector<ControlRecord> controls;
  TradingCalendar calendar;
  std::vector<Date> events;
  AlignOptions align;
};

/// What the generator knows that an estimator must recover.
struct GroundTruth {
  std::map<std::string, Column> noiseless;  // per asset: target minus noise
  std::map<std::string, Column> noise;
  std::vector<Date> events;
};

struct SimulatedData {
  RawData raw;
  Panel panel;
  GroundTruth truth;
};

namespace detail {

inline std::vector<Date> weekdays_from(Date start, std::size_t n) {
  std::vector<Date> out;
  for (Date d = start; out.size() < n; d = d.plus_days(1))
    if (!d.is_weekend()) out.push_back(d);
  return out;
}

/// Bias factor of the sample standard deviation of five normal draws.
inline const double kC4Five = std::sqrt(0.5) * std::tgamma(2.5) / std::tgamma(2.0);

inline double initial_price(const std::string& asset) {
  static const std::map<std::string, double> p = {{"BTC", 30000.0}, {"ETH", 2000.0}, {"SOL", 25.0},
                                                  {"ADA", 0.35},    {"AVAX", 15.0},  {"LINK", 7.0}};
  auto it = p.find(asset);
  return it == p.end() ? 100.0 : it->second;
}

}  // namespace detail

struct AnnouncementSignal {
  Column shocks;  // common daily repricing per panel row
  std::vector<Date> events;
};

/// Event dates (first panel date on or after `event_day_of_month` in each
/// month) and a common repricing series whose variance is
/// `event_variance_ratio` times larger on those dates.
[[nodiscard]] inline AnnouncementSignal simulate_announcement_signal(const SyntheticConfig& cfg,
                                                                     const std::vector<Date>& dates, Rng& rng) {
  AnnouncementSignal out;
  std::vector<bool> is_event(dates.size(), false);
  if (cfg.event_day_of_month > 0 && !dates.empty()) {
    int y = dates.front().year();
    unsigned m = dates.front().month();
    while (true) {
      const unsigned dom = std::min(cfg.event_day_of_month, 28u);
      const Date target(y, m, dom);
      if (target > dates.back()) break;
      auto it = std::lower_bound(dates.begin(), dates.end(), target);
      if (it != dates.end()) {
        is_event[static_cast<std::size_t>(it - dates.begin())] = true;
        if (out.events.empty() || out.events.back() != *it) out.events.push_back(*it);
      }
      if (++m > 12) {
        m = 1;
        ++y;
      }
    }
  }
  out.shocks.resize(dates.size());
  const double boost = std::sqrt(cfg.event_variance_ratio);
  for (std::size_t t = 0; t < dates.size(); ++t)
    out.shocks[t] = cfg.signal_scale * (is_event[t] ? boost : 1.0) * rng.normal();
  return out;
}

/// Gaussian GARCH(1,1) path started at the unconditional variance.
[[nodiscard]] inline std::vector<double> simulate_garch_returns(double omega, double alpha, double beta, std::size_t n,
                                                                std::uint64_t seed) {
  if (!(omega > 0.0) || alpha < 0.0 || beta < 0.0) throw ValidationError("GARCH parameters out of range");
  if (alpha + beta >= 1.0) throw ValidationError("GARCH simulation needs alpha + beta < 1");
  Rng rng(seed);
  std::vector<double> r(n);
  double s2 = omega / (1.0 - alpha - beta);
  for (std::size_t t = 0; t < n; ++t) {
    r[t] = std::sqrt(s2) * rng.normal();
    s2 = omega + alpha * r[t] * r[t] + beta * s2;
  }
  return r;
}

[[nodiscard]] inline std::vector<double> simulate_garch_returns(const SyntheticConfig& cfg, std::size_t n) {
  cfg.validate();
  return simulate_garch_returns(cfg.garch_omega, cfg.garch_alpha, cfg.garch_beta, n, derive_seed(cfg.seed, 7));
}

/// Simulates a full panel whose `{asset}.rvol5` column follows
///   y_t = a + b1 har1_t + b2 har5_t + b3 har20_t + g' ctrl_t + sum_i d_i sig_i[t-1] + u_t
/// with MA(q) Gaussian noise u_t. Signals come from simulated contract quotes
/// and are generated before the targets, so causality runs only from the
/// lagged signal to future volatility. Daily returns r[t+1] are back-filled as
/// y_t / (sqrt(252) c4) times an i.i.d. normal, which makes the five-day
/// realised volatility approximately unbiased for y_t.
[[nodiscard]] inline SimulatedData simulate_panel(const SyntheticConfig& cfg) {
  cfg.validate();
  SimulatedData out;
  auto& raw = out.raw;
  const auto dates = detail::weekdays_from(cfg.start, cfg.n_days);
  const auto n = dates.size();
  raw.calendar = TradingCalendar(dates);

  // Signals: quotes for each series around a common repricing process.
  Rng event_rng = Rng::stream(cfg.seed, 1);
  const auto announcement = simulate_announcement_signal(cfg, dates, event_rng);
  raw.events = announcement.events;
  const std::set<Date> event_set(raw.events.begin(), raw.events.end());
  for (std::size_t s = 0; s < cfg.series.size(); ++s) {
    const auto& setup = cfg.series[s];
    raw.align.orientation[setup.id] = setup.orientation;
    Rng rng = Rng::stream(cfg.seed, 100 + s);
    // The first series reprices on the shared announcement shocks; the others
    // get their own draws with the same event clustering.
    Column common = announcement.shocks;
    if (s > 0)
      for (std::size_t t = 0; t < n; ++t)
        common[t] = cfg.signal_scale * (event_set.contains(dates[t]) ? std::sqrt(cfg.event_variance_ratio) : 1.0) *
                    rng.normal();
    const long last = setup.last_row < 0 ? static_cast<long>(n) - 1 : setup.last_row;
    const std::size_t stagger = std::max<std::size_t>(1, cfg.contract_life / cfg.contracts_per_series);
    const long first_listing = setup.first_row - static_cast<long>(cfg.contract_life);
    for (long listed = first_listing, j = 0; listed <= last; listed += static_cast<long>(stagger), ++j) {
      const long from = std::max(listed, setup.first_row);
      const long to = std::min(listed + static_cast<long>(cfg.contract_life) - 1, last);
      if (to < from || to < 0) continue;
      const double anchor = 0.2 + 0.6 * rng.uniform();
      double p = anchor;
      for (long t = std::max<long>(from, 0); t <= to; ++t) {
        const auto tt = static_cast<std::size_t>(t);
        if (t > std::max<long>(from, 0))
          p = std::clamp(p + common[tt] + cfg.idiosyncratic_scale * cfg.signal_scale * rng.normal() -
                             0.05 * (p - anchor),
                         0.01, 0.99);
        const double vol_boost = event_set.contains(dates[tt]) ? 3.0 : 1.0;
        ContractQuote q;
        q.series_id = setup.id;
        q.contract_id = setup.id + "-C" + std::to_string(j);
        q.date = dates[tt];
        q.close_prob = std::round(p * 1e4) / 1e4;
        q.dollar_volume = std::round(9326.0 * vol_boost * std::exp(0.8 * rng.normal()));
        q.open_interest = std::round(278805.0 * std::exp(0.3 * rng.normal()));
        raw.quotes.push_back(q);
      }
    }
  }
  std::sort(raw.quotes.begin(), raw.quotes.end(), [](const ContractQuote& a, const ContractQuote& b) {
    return std::tie(a.date, a.series_id, a.contract_id) < std::tie(b.date, b.series_id, b.contract_id);
  });

  // Controls.
  {
    Rng rng = Rng::stream(cfg.seed, 2);
    double vix = cfg.vix_mean, dvol = cfg.dvol_mean;
    for (std::size_t t = 0; t < n; ++t) {
      vix = std::max(9.0, cfg.vix_mean + cfg.vix_persistence * (vix - cfg.vix_mean) + cfg.vix_shock_sd * rng.normal());
      dvol = std::max(20.0, cfg.dvol_mean + 0.95 * (dvol - cfg.dvol_mean) + 2.0 * rng.normal());
      ControlRecord c;
      c.date = dates[t];
      c.vix_level = vix;
      c.dxy_return = cfg.dxy_sd * rng.normal();
      c.spx_return = cfg.spx_sd * rng.normal();
      c.ff_implied_change = cfg.ff_sd * rng.normal();
      c.ust10y_return = cfg.ust_sd * rng.normal();
      c.dvol_level = dvol;
      raw.controls.push_back(c);
    }
  }

  // Signals as the pipeline will see them.
  Panel base = align_panel(raw.quotes, {}, raw.controls, raw.calendar, raw.align);
  const Column& vix = base[kVix];
  const Column& dxy = base[kDxyRet];
  const Column& spx = base[kSpxRet];

  const double abs_scale = std::sqrt(2.0 / std::numbers::pi) / (kTradingYear * detail::kC4Five);
  std::map<std::string, Column> asset_returns;
  for (std::size_t a = 0; a < cfg.assets.size(); ++a) {
    const auto& asset = cfg.assets[a];
    Rng rng = Rng::stream(cfg.seed, 1000 + a);
    std::vector<const Injection*> inj;
    for (const auto& i : cfg.injections)
      if (i.asset == asset) inj.push_back(&i);
    for (const auto* i : inj)
      if (!base.has(i->signal)) throw ValidationError("injection references unknown signal '" + i->signal + "'");

    Column r(n, kMissing), y(n, kMissing), clean(n, kMissing), noise(n, kMissing);
    std::vector<double> eps(static_cast<std::size_t>(cfg.noise_ma_order) + 1);
    for (auto& e : eps) e = rng.normal();
    const double ma_norm = 1.0 / std::sqrt(static_cast<double>(eps.size()));
    // Long-run level of mean |r| used before 20 returns exist.
    const double har_level = 0.6 * abs_scale;
    for (std::size_t t = 0; t < n; ++t) {
      const auto h = har_regressors(r, t);
      const double d = is_missing(h.lag1) ? har_level : h.lag1;
      const double w = is_missing(h.mean5) ? har_level : h.mean5;
      const double m = is_missing(h.mean20) ? har_level : h.mean20;
      double mu = cfg.intercept + cfg.beta_daily * d + cfg.beta_weekly * w + cfg.beta_monthly * m +
                  cfg.gamma_vix * vix[t] + cfg.gamma_dxy * dxy[t] + cfg.gamma_spx * spx[t];
      for (const auto* i : inj) {
        const double s = t > 0 ? base[i->signal][t - 1] : kMissing;
        if (!is_missing(s)) mu += i->coefficient * s;
      }
      std::rotate(eps.rbegin(), eps.rbegin() + 1, eps.rend());
      eps[0] = rng.normal();
      double u = 0.0;
      for (double e : eps) u += e;
      u *= ma_norm * cfg.noise_sd;
      clean[t] = mu;
      noise[t] = u;
      y[t] = mu + u;
      if (t + 1 < n) r[t + 1] = std::max(y[t], cfg.vol_floor) / (kTradingYear * detail::kC4Five) * rng.normal();
    }
    double price = detail::initial_price(asset);
    for (std::size_t t = 0; t < n; ++t) {
      if (t > 0) price *= std::exp(r[t]);
      raw.prices.push_back(PriceBar{asset, dates[t], price});
    }
    // The last five rows have no realised target window.
    for (std::size_t t = n >= 5 ? n - 5 : 0; t < n; ++t) y[t] = clean[t] = noise[t] = kMissing;
    out.truth.noiseless[asset] = std::move(clean);
    out.truth.noise[asset] = std::move(noise);
    asset_returns[asset] = std::move(y);
  }
  out.truth.events = raw.events;

  out.panel = align_panel(raw.quotes, raw.prices, raw.controls, raw.calendar, raw.align);
  for (const auto& asset : cfg.assets) {
    VolatilityOptions vo;
    vo.horizons = {1, 3, 10, 21};
    add_volatility_columns(out.panel, asset, vo);
    Column planted = asset_returns[asset];
    Column lrv(n, kMissing);
    for (std::size_t t = 0; t < n; ++t) lrv[t] = is_missing(planted[t]) ? kMissing : std::log(std::max(planted[t], 0.0) + 0.001);
    out.panel.set(rvol_column(asset, 5), std::move(planted));
    out.panel.set(logrvol_column(asset), std::move(lrv));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config file: plain `key = value` lines (INI syntax, no sections needed).
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  for (auto& part : csv::split(s, sep)) {
    auto t = csv::trim(part);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace detail

/// Reads a synthetic config from a property tree. Unknown keys are rejected
/// so typos surface as validation errors.
[[nodiscard]] inline SyntheticConfig synthetic_config_from(const boost::property_tree::ptree& tree) {
  SyntheticConfig c;
  const std::set<std::string> known = {
      "seed",           "n_days",         "start",          "assets",        "intercept",
      "beta_daily",     "beta_weekly",    "beta_monthly",   "gamma_vix",     "gamma_dxy",
      "gamma_spx",      "noise_sd",       "noise_ma_order", "vol_floor",     "inject",
      "delta",          "series",         "series_windows", "signal_scale",  "event_variance_ratio",
      "event_day_of_month", "contracts_per_series", "contract_life", "idiosyncratic_scale", "vix_mean",
      "vix_persistence", "vix_shock_sd",  "dxy_sd",         "spx_sd",        "ff_sd",
      "ust_sd",         "dvol_mean",      "garch_omega",    "garch_alpha",   "garch_beta"};
  for (const auto& [key, node] : tree)
    if (!known.contains(key)) throw ValidationError("unknown synthetic config key '" + key + "'");
  auto num = [&](const char* key, double& dst) {
    if (auto v = tree.get_optional<std::string>(key)) dst = csv::parse_double(*v);
  };
  auto integer = [&](const char* key, auto& dst) {
    if (auto v = tree.get_optional<std::string>(key)) {
      const double d = csv::parse_double(*v);
      if (d < 0 || d != std::floor(d)) throw ValidationError(std::string(key) + " must be a non-negative integer");
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(d);
    }
  };
  try {
    if (auto v = tree.get_optional<std::string>("seed")) c.seed = std::stoull(csv::trim(*v));
  } catch (const std::exception&) {
    throw ValidationError("seed must be an unsigned integer");
  }
  integer("n_days", c.n_days);
  if (auto v = tree.get_optional<std::string>("start")) c.start = Date::parse(csv::trim(*v));
  if (auto v = tree.get_optional<std::string>("assets")) c.assets = detail::split_list(*v);
  num("intercept", c.intercept);
  num("beta_daily", c.beta_daily);
  num("beta_weekly", c.beta_weekly);
  num("beta_monthly", c.beta_monthly);
  num("gamma_vix", c.gamma_vix);
  num("gamma_dxy", c.gamma_dxy);
  num("gamma_spx", c.gamma_spx);
  num("noise_sd", c.noise_sd);
  integer("noise_ma_order", c.noise_ma_order);
  num("vol_floor", c.vol_floor);
  if (auto v = tree.get_optional<std::string>("inject")) {
    c.injections.clear();
    for (const auto& item : detail::split_list(*v, ';')) {
      const auto f = detail::split_list(item, ':');
      if (f.size() != 3) throw ValidationError("inject entries are ASSET:SIGNAL_COLUMN:COEFFICIENT");
      c.injections.push_back({f[0], f[1], csv::parse_double(f[2])});
    }
  }
  if (auto v = tree.get_optional<std::string>("delta")) {
    if (c.injections.empty()) throw ValidationError("delta given but no injection configured");
    c.injections.front().coefficient = csv::parse_double(*v);
  }
  if (auto v = tree.get_optional<std::string>("series")) {
    c.series.clear();
    for (const auto& item : detail::split_list(*v)) {
      const auto f = detail::split_list(item, ':');
      if (f.empty() || f.size() > 2) throw ValidationError("series entries are ID or ID:ORIENTATION");
      c.series.push_back({f[0], f.size() == 2 ? parse_orientation(f[1]) : Orientation::kRaw, 0, -1});
    }
  }
  if (auto v = tree.get_optional<std::string>("series_windows")) {
    for (const auto& item : detail::split_list(*v)) {
      const auto f = detail::split_list(item, ':');
      if (f.size() != 3) throw ValidationError("series_windows entries are ID:FIRST_ROW:LAST_ROW");
      auto it = std::find_if(c.series.begin(), c.series.end(), [&](const SeriesSetup& s) { return s.id == f[0]; });
      if (it == c.series.end()) throw ValidationError("series_windows names unknown series '" + f[0] + "'");
      it->first_row = static_cast<long>(csv::parse_double(f[1]));
      it->last_row = static_cast<long>(csv::parse_double(f[2]));
    }
  }
  num("signal_scale", c.signal_scale);
  num("event_variance_ratio", c.event_variance_ratio);
  integer("event_day_of_month", c.event_day_of_month);
  integer("contracts_per_series", c.contracts_per_series);
  integer("contract_life", c.contract_life);
  num("idiosyncratic_scale", c.idiosyncratic_scale);
  num("vix_mean", c.vix_mean);
  num("vix_persistence", c.vix_persistence);
  num("vix_shock_sd", c.vix_shock_sd);
  num("dxy_sd", c.dxy_sd);
  num("spx_sd", c.spx_sd);
  num("ff_sd", c.ff_sd);
  num("ust_sd", c.ust_sd);
  num("dvol_mean", c.dvol_mean);
  num("garch_omega", c.garch_omega);
  num("garch_alpha", c.garch_alpha);
  num("garch_beta", c.garch_beta);
  c.validate();
  return c;
}

[[nodiscard]] inline SyntheticConfig read_synthetic_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("synthetic config: ") + e.what());
  }
  return synthetic_config_from(tree);
}

[[nodiscard]] inline SyntheticConfig load_synthetic_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  return read_synthetic_config(in);
}

/// Writes quotes.csv, prices.csv, controls.csv and events.txt into `dir`.
inline std::vector<std::string> write_raw_data(const RawData& raw, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw IoError("cannot write '" + (dir / name).string() + "'");
    return f;
  };
  {
    auto f = open("quotes.csv");
    write_quotes(f, raw.quotes);
  }
  {
    auto f = open("prices.csv");
    write_prices(f, raw.prices);
  }
  {
    auto f = open("controls.csv");
    write_controls(f, raw.controls);
  }
  {
    auto f = open("events.txt");
    for (const auto& d : raw.events) f << d.iso() << '\n';
  }
  return {"quotes.csv", "prices.csv", "controls.csv", "events.txt"};
}

}  // namespace pmvol
