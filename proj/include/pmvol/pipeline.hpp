#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmvol/align.hpp"
#include "pmvol/csv.hpp"
#include "pmvol/error.hpp"
#include "pmvol/http_source.hpp"
#include "pmvol/inference.hpp"
#include "pmvol/market_data.hpp"
#include "pmvol/oos.hpp"
#include "pmvol/panel.hpp"
#include "pmvol/portfolio.hpp"
#include "pmvol/regression.hpp"
#include "pmvol/synthetic.hpp"
#include "pmvol/volatility.hpp"

namespace pmvol {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct SignalPair {
  std::string asset;
  std::string signal;  // panel column
};

struct RunConfig {
  std::uint64_t seed = 20260316;
  fs::path output = "artifacts";
  fs::path base_dir = ".";  // relative data paths resolve against this

  // [data]
  std::string source = "files";  // files | synthetic | http
  fs::path quotes_path, prices_path, controls_path, holidays_path, events_path, synthetic_path;
  std::optional<Date> start, end;

  // [model]
  std::vector<std::string> assets;
  std::vector<std::pair<std::string, Orientation>> series;
  std::vector<std::string> grid_variants = {"abs", "dir"};
  bool grid_composite = true;
  std::vector<SignalPair> pairs;
  std::vector<int> horizons = {1, 3, 5, 10, 21};
  int hac_lags = 5;
  std::vector<std::string> controls = {kVix, kDxyRet, kSpxRet};
  double annualization = kTradingYear;
  bool garch = false;

  // [oos]
  bool oos = true;
  std::size_t initial = 120;
  double weight_cap = kDefaultWeightCap;

  // [robustness]
  bool robustness = true;
  double q = 0.05;
  std::size_t min_coverage = kDefaultMinCoverage;
  bool bootstrap = true;
  std::size_t block_length = 5;
  std::size_t resamples = 2000;
  std::vector<std::vector<std::string>> orthogonalize_sets = {{kVix, kDxyRet, kSpxRet}};
  bool lead_lag = true;
  bool release_windows = true;
  int release_half_width = 1;
  bool non_overlapping = true;
  bool alternative_targets = true;
  std::size_t threads = 1;

  [[nodiscard]] fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

  void validate() const {
    if (source != "files" && source != "synthetic" && source != "http")
      throw ValidationError("data.source must be files, synthetic or http");
    if (source == "files" && (quotes_path.empty() || prices_path.empty() || controls_path.empty()))
      throw ValidationError("data.quotes, data.prices and data.controls are required for file sources");
    if (source == "synthetic" && synthetic_path.empty()) throw ValidationError("data.synthetic is required");
    if (assets.empty()) throw ValidationError("model.assets is empty");
    if (!(q > 0.0 && q < 1.0)) throw ValidationError("robustness.q must lie in (0,1)");
    if (hac_lags < 0) throw ValidationError("model.hac_lags must be non-negative");
    if (horizons.empty()) throw ValidationError("model.horizons is empty");
    for (int h : horizons)
      if (h < 1) throw ValidationError("horizons must be positive");
    if (block_length == 0) throw ValidationError("robustness.block_length must be positive");
    for (const auto& p : pairs)
      if (std::find(assets.begin(), assets.end(), p.asset) == assets.end())
        throw ValidationError("model.pairs references asset '" + p.asset + "' not in model.assets");
    for (const auto& v : grid_variants)
      if (v != kVariantVw && v != kVariantAbs && v != kVariantDir && v != kVariantEma)
        throw ValidationError("unknown signal variant '" + v + "'");
  }
};

namespace detail {

inline bool parse_bool(const std::string& raw, const std::string& key) {
  const auto v = csv::trim(raw);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError(key + " must be a boolean");
}

inline std::size_t parse_count(const std::string& raw, const std::string& key) {
  const double d = csv::parse_double(raw);
  if (d < 0 || d != std::floor(d)) throw ValidationError(key + " must be a non-negative integer");
  return static_cast<std::size_t>(d);
}

}  // namespace detail

/// Parses an INI run config. Top-level keys: seed, output. Sections: data,
/// model, oos, robustness. Unknown keys are rejected.
[[nodiscard]] inline RunConfig run_config_from(const boost::property_tree::ptree& tree, const fs::path& base_dir) {
  static const std::map<std::string, std::set<std::string>> known = {
      {"", {"seed", "output"}},
      {"data", {"source", "quotes", "prices", "controls", "holidays", "events", "synthetic", "start", "end"}},
      {"model",
       {"assets", "series", "grid_variants", "grid_composite", "pairs", "horizons", "hac_lags", "controls",
        "annualization", "garch"}},
      {"oos", {"enabled", "initial", "weight_cap"}},
      {"robustness",
       {"enabled", "q", "min_coverage", "bootstrap", "block_length", "resamples", "orthogonalize", "lead_lag",
        "release_windows", "release_half_width", "non_overlapping", "alternative_targets", "threads"}}};
  for (const auto& [key, node] : tree) {
    if (!node.empty()) {
      auto sec = known.find(key);
      if (sec == known.end() || key.empty()) throw ValidationError("unknown config section [" + key + "]");
      for (const auto& [k, v] : node)
        if (!sec->second.contains(k)) throw ValidationError("unknown config key " + key + "." + k);
    } else if (!known.at("").contains(key)) {
      throw ValidationError("unknown config key '" + key + "'");
    }
  }

  RunConfig c;
  c.base_dir = base_dir;
  auto get = [&](const std::string& path) { return tree.get_optional<std::string>(path); };
  auto list = [&](const std::string& path, char sep = ',') {
    return get(path) ? detail::split_list(*get(path), sep) : std::vector<std::string>{};
  };

  if (auto v = get("seed")) {
    try {
      c.seed = std::stoull(csv::trim(*v));
    } catch (const std::exception&) {
      throw ValidationError("seed must be an unsigned integer");
    }
  }
  if (auto v = get("output")) c.output = csv::trim(*v);

  if (auto v = get("data.source")) c.source = csv::trim(*v);
  if (auto v = get("data.quotes")) c.quotes_path = csv::trim(*v);
  if (auto v = get("data.prices")) c.prices_path = csv::trim(*v);
  if (auto v = get("data.controls")) c.controls_path = csv::trim(*v);
  if (auto v = get("data.holidays")) c.holidays_path = csv::trim(*v);
  if (auto v = get("data.events")) c.events_path = csv::trim(*v);
  if (auto v = get("data.synthetic")) c.synthetic_path = csv::trim(*v);
  if (auto v = get("data.start")) c.start = Date::parse(csv::trim(*v));
  if (auto v = get("data.end")) c.end = Date::parse(csv::trim(*v));

  c.assets = list("model.assets");
  for (const auto& item : list("model.series")) {
    const auto f = detail::split_list(item, ':');
    if (f.empty() || f.size() > 2) throw ValidationError("model.series entries are ID or ID:ORIENTATION");
    c.series.emplace_back(f[0], f.size() == 2 ? parse_orientation(f[1]) : Orientation::kRaw);
  }
  if (get("model.grid_variants")) c.grid_variants = list("model.grid_variants");
  if (auto v = get("model.grid_composite")) c.grid_composite = detail::parse_bool(*v, "model.grid_composite");
  for (const auto& item : list("model.pairs", ';')) {
    const auto f = detail::split_list(item, ':');
    if (f.size() != 2) throw ValidationError("model.pairs entries are ASSET:SIGNAL_COLUMN");
    c.pairs.push_back({f[0], f[1]});
  }
  if (get("model.horizons")) {
    c.horizons.clear();
    for (const auto& h : list("model.horizons")) c.horizons.push_back(static_cast<int>(detail::parse_count(h, "horizon")));
  }
  if (auto v = get("model.hac_lags")) c.hac_lags = static_cast<int>(detail::parse_count(*v, "model.hac_lags"));
  if (get("model.controls")) c.controls = list("model.controls");
  if (auto v = get("model.annualization")) {
    const double days = csv::parse_double(*v);
    if (!(days > 0.0)) throw ValidationError("model.annualization must be a positive day count");
    c.annualization = std::sqrt(days);
  }
  if (auto v = get("model.garch")) c.garch = detail::parse_bool(*v, "model.garch");

  if (auto v = get("oos.enabled")) c.oos = detail::parse_bool(*v, "oos.enabled");
  if (auto v = get("oos.initial")) c.initial = detail::parse_count(*v, "oos.initial");
  if (auto v = get("oos.weight_cap")) c.weight_cap = csv::parse_double(*v);

  if (auto v = get("robustness.enabled")) c.robustness = detail::parse_bool(*v, "robustness.enabled");
  if (auto v = get("robustness.q")) c.q = csv::parse_double(*v);
  if (auto v = get("robustness.min_coverage")) c.min_coverage = detail::parse_count(*v, "robustness.min_coverage");
  if (auto v = get("robustness.bootstrap")) c.bootstrap = detail::parse_bool(*v, "robustness.bootstrap");
  if (auto v = get("robustness.block_length")) c.block_length = detail::parse_count(*v, "robustness.block_length");
  if (auto v = get("robustness.resamples")) c.resamples = detail::parse_count(*v, "robustness.resamples");
  if (get("robustness.orthogonalize")) {
    c.orthogonalize_sets.clear();
    for (const auto& set : list("robustness.orthogonalize", ';')) c.orthogonalize_sets.push_back(detail::split_list(set));
  }
  if (auto v = get("robustness.lead_lag")) c.lead_lag = detail::parse_bool(*v, "robustness.lead_lag");
  if (auto v = get("robustness.release_windows"))
    c.release_windows = detail::parse_bool(*v, "robustness.release_windows");
  if (auto v = get("robustness.release_half_width"))
    c.release_half_width = static_cast<int>(detail::parse_count(*v, "robustness.release_half_width"));
  if (auto v = get("robustness.non_overlapping"))
    c.non_overlapping = detail::parse_bool(*v, "robustness.non_overlapping");
  if (auto v = get("robustness.alternative_targets"))
    c.alternative_targets = detail::parse_bool(*v, "robustness.alternative_targets");
  if (auto v = get("robustness.threads")) c.threads = detail::parse_count(*v, "robustness.threads");
  c.validate();
  return c;
}

[[nodiscard]] inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return run_config_from(tree, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------
// Digests and manifest
// ---------------------------------------------------------------------------

[[nodiscard]] inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw ComputationError("SHA-256 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int{md[i]};
  return out.str();
}

[[nodiscard]] inline std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read '" + p.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline constexpr const char* kManifestName = "manifest.txt";

/// `sha256sum`-style lines for every file under `dir` except the manifest,
/// sorted by relative path.
inline void write_manifest(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) {
      auto rel = fs::relative(e.path(), dir).generic_string();
      if (rel != kManifestName) files.push_back(rel);
    }
  std::sort(files.begin(), files.end());
  std::ofstream out(dir / kManifestName, std::ios::binary);
  if (!out) throw IoError("cannot write manifest in '" + dir.string() + "'");
  for (const auto& f : files) out << sha256_hex(read_bytes(dir / f)) << "  " << f << '\n';
}

/// Relative path -> digest.
[[nodiscard]] inline std::map<std::string, std::string> read_manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw IoError("no manifest in '" + dir.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto sep = line.find("  ");
    if (sep != 64) throw SchemaError("malformed manifest line: " + line);
    out[line.substr(sep + 2)] = line.substr(0, sep);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

enum class Stage { kIngest, kSignals, kEstimate, kGrid, kOos, kRobustness };

[[nodiscard]] inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kIngest: return "ingest";
    case Stage::kSignals: return "signals";
    case Stage::kEstimate: return "estimate";
    case Stage::kGrid: return "grid";
    case Stage::kOos: return "oos";
    case Stage::kRobustness: return "robustness";
  }
  return "?";
}

namespace detail {

/// Rethrows with the stage name prefixed, keeping the exit code.
template <class F>
void in_stage(const char* stage, F&& f) {
  const std::string tag = std::string("[") + stage + "] ";
  try {
    f();
  } catch (const ValidationError& e) {
    throw ValidationError(tag + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(tag + e.what());
  } catch (const IoError& e) {
    throw IoError(tag + e.what());
  } catch (const Error& e) {
    throw ComputationError(tag + e.what());
  } catch (const fs::filesystem_error& e) {
    throw IoError(tag + e.what());
  }
}

inline std::string safe_field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

inline std::string file_tag(const SignalPair& p) { return p.asset + "_" + p.signal; }

}  // namespace detail

/// State shared by the stages of one invocation.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  [[nodiscard]] const RunConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const Panel& panel() const { return *panel_; }
  [[nodiscard]] const RawData& raw() const noexcept { return raw_; }
  [[nodiscard]] const std::vector<SignalPair>& pairs() const noexcept { return pairs_; }

  /// Runs stages up to and including `last`; only stages in `emit` write
  /// artifacts. Writes the manifest afterwards.
  void run(Stage last, const std::set<Stage>& emit) {
    fs::create_directories(cfg_.output);
    const auto upto = static_cast<int>(last);
    auto go = [&](Stage s, void (Pipeline::*fn)(bool)) {
      if (static_cast<int>(s) > upto) return;
      detail::in_stage(stage_name(s), [&] { (this->*fn)(emit.contains(s)); });
    };
    go(Stage::kIngest, &Pipeline::ingest);
    go(Stage::kSignals, &Pipeline::signals);
    go(Stage::kEstimate, &Pipeline::estimate_models);
    go(Stage::kGrid, &Pipeline::grid);
    if (cfg_.oos) go(Stage::kOos, &Pipeline::oos);
    if (cfg_.robustness) go(Stage::kRobustness, &Pipeline::robustness);
    detail::in_stage("manifest", [&] { write_manifest(cfg_.output); });
  }

  void ingest(bool emit) {
    std::vector<std::tuple<std::string, std::size_t, std::string>> rejected;
    std::vector<std::tuple<std::string, std::size_t, std::size_t>> summary;
    auto note = [&](const std::string& name, const auto& res) {
      for (const auto& r : res.rejections) rejected.emplace_back(name, r.line, r.reason);
      summary.emplace_back(name, res.records.size(), res.rejections.size());
    };
    if (cfg_.source == "synthetic") {
      sim_ = simulate_panel(load_synthetic_config(cfg_.resolve(cfg_.synthetic_path).string()));
      raw_ = sim_->raw;
      summary = {{"quotes", raw_.quotes.size(), 0}, {"prices", raw_.prices.size(), 0}, {"controls", raw_.controls.size(), 0}};
    } else {
      if (cfg_.source == "http") {
        auto src = http::SourceConfig::from_env();
        if (src.quotes_url.empty() || src.prices_url.empty() || src.controls_url.empty())
          throw ValidationError(std::string("http source needs ") + http::kQuotesUrlEnv + ", " + http::kPricesUrlEnv +
                                " and " + http::kControlsUrlEnv);
        auto q = http::fetch_contract_quotes(src.quotes_url, src.token);
        auto p = http::fetch_prices(src.prices_url, src.token);
        auto c = http::fetch_controls(src.controls_url, src.token);
        note("quotes", q);
        note("prices", p);
        note("controls", c);
        raw_.quotes = std::move(q.records);
        raw_.prices = std::move(p.records);
        raw_.controls = std::move(c.records);
      } else {
        auto q = ingest_contract_quotes(cfg_.resolve(cfg_.quotes_path).string());
        auto p = ingest_prices(cfg_.resolve(cfg_.prices_path).string());
        auto c = ingest_controls(cfg_.resolve(cfg_.controls_path).string());
        note("quotes", q);
        note("prices", p);
        note("controls", c);
        raw_.quotes = std::move(q.records);
        raw_.prices = std::move(p.records);
        raw_.controls = std::move(c.records);
      }
      if (raw_.prices.empty()) throw ValidationError("no valid price records");
      auto [lo, hi] = std::minmax_element(raw_.prices.begin(), raw_.prices.end(),
                                          [](const PriceBar& a, const PriceBar& b) { return a.date < b.date; });
      const auto holidays = cfg_.holidays_path.empty() ? std::vector<Date>{} : load_holidays(cfg_.resolve(cfg_.holidays_path).string());
      raw_.calendar = build_calendar(cfg_.start.value_or(lo->date), cfg_.end.value_or(hi->date), holidays);
      if (!cfg_.events_path.empty()) {
        std::ifstream in(cfg_.resolve(cfg_.events_path));
        if (!in) throw IoError("cannot read '" + cfg_.resolve(cfg_.events_path).string() + "'");
        raw_.events = read_holidays(in);
      }
    }
    for (const auto& [id, o] : cfg_.series) raw_.align.orientation[id] = o;
    // Referenced assets and series must exist before anything is computed.
    std::set<std::string> assets, series;
    for (const auto& b : raw_.prices) assets.insert(b.asset_id);
    for (const auto& q : raw_.quotes) series.insert(q.series_id);
    for (const auto& a : cfg_.assets)
      if (!assets.contains(a)) throw ValidationError("asset '" + a + "' has no price records");
    for (const auto& [id, o] : cfg_.series)
      if (!series.contains(id)) throw ValidationError("series '" + id + "' has no contract quotes");

    if (!emit) return;
    fs::create_directories(cfg_.output / "ingest");
    std::ofstream r(cfg_.output / "ingest" / "rejections.csv", std::ios::binary);
    r << "source,line,reason\n";
    for (const auto& [src, line, reason] : rejected) r << src << ',' << line << ',' << detail::safe_field(reason) << '\n';
    std::ofstream s(cfg_.output / "ingest" / "summary.csv", std::ios::binary);
    s << "source,accepted,rejected\n";
    for (const auto& [src, ok, bad] : summary) s << src << ',' << ok << ',' << bad << '\n';
  }

  void signals(bool emit) {
    if (sim_) {
      panel_ = sim_->panel;
    } else {
      panel_ = align_panel(raw_.quotes, raw_.prices, raw_.controls, raw_.calendar, raw_.align);
    }
    auto& p = *panel_;
    for (const auto& a : cfg_.assets) {
      VolatilityOptions vo;
      vo.annualization = cfg_.annualization;
      vo.garch = cfg_.garch;
      if (sim_) {
        // Simulated panels already hold the planted targets.
        if (cfg_.garch) p.set(garchvar_column(a), garch_variance_column(p[return_column(a)]));
      } else {
        vo.horizons = cfg_.horizons;
        if (std::find(vo.horizons.begin(), vo.horizons.end(), 5) == vo.horizons.end()) vo.horizons.push_back(5);
        add_volatility_columns(p, a, vo);
      }
    }
    for (const auto& c : cfg_.controls)
      if (!p.has(c)) throw ValidationError("control column '" + c + "' is not in the panel");

    // Signal columns for the grid, and the estimation pairs.
    grid_signals_.clear();
    for (const auto& [id, o] : series_ids())
      for (const auto& v : cfg_.grid_variants) grid_signals_.push_back(signal_column(id, v));
    if (cfg_.grid_composite) grid_signals_.push_back(kCompositeColumn);
    pairs_ = cfg_.pairs;
    if (pairs_.empty()) {
      const auto ids = series_ids();
      if (ids.empty()) throw ValidationError("no signal series available");
      for (const auto& a : cfg_.assets) pairs_.push_back({a, signal_column(ids.front().first, kVariantDir)});
    }
    for (const auto& pr : pairs_)
      if (!p.has(pr.signal)) throw ValidationError("signal column '" + pr.signal + "' is not in the panel");

    if (!emit) return;
    persist_panel(p, (cfg_.output / "panel.csv").string());
    fs::create_directories(cfg_.output / "signals");
    std::ofstream out(cfg_.output / "signals" / "coverage.csv", std::ios::binary);
    out << "asset,series_id,usable,first_active,excluded\n";
    const auto all = build_all_signals(raw_.quotes, raw_.calendar, raw_.align);
    for (const auto& a : cfg_.assets)
      for (const auto& row : coverage_report(all, p[return_column(a)], cfg_.min_coverage))
        out << a << ',' << row.series_id << ',' << row.usable << ',' << row.first_active << ','
            << (row.excluded ? 1 : 0) << '\n';
  }

  void estimate_models(bool emit) {
    if (!emit) return;
    fs::create_directories(cfg_.output / "estimate");
    std::ofstream eff(cfg_.output / "estimate" / "effects.csv", std::ios::binary);
    eff << "asset,signal,n,coefficient,std_error,t_stat,p_value,iqr,effect,adj_r2_m2,adj_r2_m3\n";
    for (const auto& pr : pairs_) {
      const auto ladder = model_ladder(pr.asset, pr.signal, ladder_options());
      const auto fits = estimate_nested(ladder, *panel_);
      {
        std::ofstream t(cfg_.output / "estimate" / ("models_" + detail::file_tag(pr) + ".csv"), std::ios::binary);
        write_model_table(t, fits);
      }
      const auto term = lagged_term(pr.signal);
      const auto& m3 = fits[2];
      const auto sig = stats::present(m3_signal_values(m3, pr.signal));
      const double iqr = stats::quantile(sig, 0.75) - stats::quantile(sig, 0.25);
      eff << pr.asset << ',' << pr.signal << ',' << m3.n_obs << ',' << csv::fixed(m3.coefficient(term), 6) << ','
          << csv::fixed(m3.std_error(term), 6) << ',' << csv::fixed(m3.t_stat(term), 4) << ','
          << csv::fixed(m3.p_value(term), 6) << ',' << csv::fixed(iqr, 6) << ','
          << csv::fixed(effect_size(m3.coefficient(term), stats::quantile(sig, 0.25), stats::quantile(sig, 0.75)), 6)
          << ',' << csv::fixed(fits[1].adj_r2, 4) << ',' << csv::fixed(m3.adj_r2, 4) << '\n';

      std::ofstream h(cfg_.output / "estimate" / ("horizons_" + detail::file_tag(pr) + ".csv"), std::ios::binary);
      h << "horizon,n,coefficient,std_error,t_stat,p_value,adj_r2\n";
      for (const auto& r : horizon_sweep(ladder[2], pr.asset, *panel_, cfg_.horizons))
        h << r.horizon << ',' << r.fit.n_obs << ',' << csv::fixed(r.fit.coefficient(term), 6) << ','
          << csv::fixed(r.fit.std_error(term), 6) << ',' << csv::fixed(r.fit.t_stat(term), 4) << ','
          << csv::fixed(r.fit.p_value(term), 6) << ',' << csv::fixed(r.fit.adj_r2, 4) << '\n';
    }
  }

  void grid(bool emit) {
    if (!emit) return;
    GridOptions go;
    go.ladder = ladder_options();
    go.q = cfg_.q;
    go.min_coverage = cfg_.min_coverage;
    go.threads = cfg_.threads;
    const auto cells = run_grid(grid_signals_, cfg_.assets, *panel_, go);
    fs::create_directories(cfg_.output / "grid");
    std::ofstream m(cfg_.output / "grid" / "matrix.csv", std::ios::binary);
    write_grid_matrix(m, cells, grid_signals_, cfg_.assets);
    std::ofstream l(cfg_.output / "grid" / "long.csv", std::ios::binary);
    write_grid_long(l, cells);
  }

  void oos(bool emit) {
    if (!emit) return;
    fs::create_directories(cfg_.output / "oos");
    std::vector<OosSummaryRow> rows;
    std::ofstream gap(cfg_.output / "oos" / "rv_gap.csv", std::ios::binary);
    gap << "asset,signal,date,baseline,augmented,gap,relative_gap\n";
    for (const auto& pr : pairs_) {
      const auto ladder = model_ladder(pr.asset, pr.signal, ladder_options());
      auto run = run_oos(ladder[1], ladder[2], *panel_, OosOptions{cfg_.initial});
      {
        std::ofstream c(cfg_.output / "oos" / ("cssed_" + detail::file_tag(pr) + ".csv"), std::ios::binary);
        write_cssed(c, run);
      }
      // Position sizing from the augmented forecasts.
      std::vector<Date> dates;
      Column fc;
      for (const auto& r : run.records) {
        dates.push_back(r.date);
        fc.push_back(std::max(r.yhat_augmented, 0.0));
      }
      const double sigma_bar = default_sigma_bar((*panel_)[ladder[2].target]);
      {
        std::ofstream w(cfg_.output / "oos" / ("weights_" + detail::file_tag(pr) + ".csv"), std::ios::binary);
        write_weights(w, vol_managed_weights(dates, fc, sigma_bar, cfg_.weight_cap));
      }
      // Origin where the signal moves the forecast furthest below the benchmark.
      const ForecastRecord* best = nullptr;
      for (const auto& r : run.records)
        if (r.yhat_baseline > 0.0 && (!best || r.yhat_baseline - r.yhat_augmented > best->yhat_baseline - best->yhat_augmented))
          best = &r;
      if (best) {
        const auto g = predicted_rv_gap(best->yhat_augmented, best->yhat_baseline);
        gap << pr.asset << ',' << pr.signal << ',' << best->date.iso() << ',' << csv::fixed(best->yhat_baseline, 6)
            << ',' << csv::fixed(best->yhat_augmented, 6) << ',' << csv::fixed(g.absolute, 6) << ','
            << csv::fixed(g.relative, 6) << '\n';
      }
      rows.push_back({pr.asset, pr.signal, std::move(run)});
    }
    std::ofstream s(cfg_.output / "oos" / "summary.csv", std::ios::binary);
    write_oos_summary(s, rows);
  }

  void robustness(bool emit) {
    if (!emit) return;
    fs::create_directories(cfg_.output / "robustness");
    std::ofstream out(cfg_.output / "robustness" / "report.csv", std::ios::binary);
    out << "asset,signal,check,term,estimate,t_stat,p_value,n,note\n";
    auto line = [&](const SignalPair& pr, const std::string& check, const std::string& term, double est, double t,
                    double p, std::size_t n, const std::string& note) {
      out << pr.asset << ',' << pr.signal << ',' << check << ',' << term << ',' << csv::fixed(est, 6) << ','
          << csv::fixed(t, 4) << ',' << csv::fixed(p, 6) << ',' << n << ',' << detail::safe_field(note) << '\n';
    };
    auto fit_line = [&](const SignalPair& pr, const std::string& check, const ModelFit& f, const std::string& term,
                        const std::string& note = {}) {
      line(pr, check, term, f.coefficient(term), f.t_stat(term), f.p_value(term), f.n_obs, note);
    };
    // Each check is isolated: a failure is reported on its own line.
    auto guarded = [&](const SignalPair& pr, const std::string& check, const std::function<void()>& body) {
      try {
        body();
      } catch (const Error& e) {
        line(pr, check, "", kMissing, kMissing, kMissing, 0, std::string("failed: ") + e.what());
      }
    };

    Panel p = *panel_;  // robustness columns never leak into upstream artifacts
    if (cfg_.release_windows)
      p.set("release_window", release_window_dummy(p.dates(), raw_.events, cfg_.release_half_width));

    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto& pr = pairs_[k];
      const auto m3 = signal_spec(pr.asset, pr.signal, ladder_options());
      const auto term = lagged_term(pr.signal);
      guarded(pr, "baseline", [&] { fit_line(pr, "baseline", estimate(m3, p), term); });
      if (cfg_.bootstrap)
        guarded(pr, "block_bootstrap", [&] {
          BootstrapOptions bo;
          bo.block_length = cfg_.block_length;
          bo.n_resamples = cfg_.resamples;
          bo.seed = derive_seed(cfg_.seed, k);
          bo.threads = cfg_.threads;
          const auto b = moving_block_bootstrap(m3, p, term, bo);
          line(pr, "block_bootstrap", term, b.point_estimate, kMissing, b.p_value, estimation_rows(m3, p).size(),
               "block " + std::to_string(bo.block_length) + " resamples " + std::to_string(bo.n_resamples));
        });
      for (std::size_t s = 0; s < cfg_.orthogonalize_sets.size(); ++s)
        guarded(pr, "orthogonalized", [&] {
          const auto& set = cfg_.orthogonalize_sets[s];
          const auto o = orthogonalize(p, pr.signal, set);
          Panel q = p;
          const std::string col = pr.signal + ".orth" + std::to_string(s);
          q.set(col, o.residual);
          const auto f = estimate(signal_spec(pr.asset, col, ladder_options()), q);
          std::string names;
          for (const auto& c : set) names += (names.empty() ? "" : "+") + c;
          fit_line(pr, "orthogonalized", f, lagged_term(col), "controls " + names + " first-stage r2 " + csv::fixed(o.r2, 4));
        });
      if (cfg_.lead_lag)
        guarded(pr, "lead_lag", [&] {
          const auto ll = lead_lag_test(m3, pr.signal, p);
          fit_line(pr, "lead_lag", ll.lagged, ll.lagged_term);
          fit_line(pr, "lead_lag", ll.lead, ll.lead_term);
        });
      if (cfg_.release_windows)
        guarded(pr, "ex_release_windows", [&] {
          auto s = m3;
          s.exclude_when.push_back("release_window");
          s.name += "-exrelease";
          fit_line(pr, "ex_release_windows", estimate(s, p), term,
                   std::to_string(raw_.events.size()) + " events +-" + std::to_string(cfg_.release_half_width));
        });
      if (cfg_.non_overlapping)
        guarded(pr, "non_overlapping", [&] { fit_line(pr, "non_overlapping", estimate(non_overlapping(m3), p), term, "HC3"); });
      if (cfg_.alternative_targets) {
        guarded(pr, "absret1", [&] {
          fit_line(pr, "absret1", estimate(retargeted(m3, rvol_column(pr.asset, 1), 1, "absret1"), p), term);
        });
        guarded(pr, "logrvol5", [&] {
          fit_line(pr, "logrvol5", estimate(retargeted(m3, logrvol_column(pr.asset), 5, "logrvol5"), p), term);
        });
        if (cfg_.garch)
          guarded(pr, "garchvar", [&] {
            fit_line(pr, "garchvar", estimate(retargeted(m3, garchvar_column(pr.asset), 1, "garchvar"), p), term);
          });
      }
    }
  }

 private:
  [[nodiscard]] LadderOptions ladder_options() const {
    LadderOptions o;
    o.controls = cfg_.controls;
    o.hac_lags = cfg_.hac_lags;
    return o;
  }

  /// Configured series, or every series seen in the quotes when none is configured.
  [[nodiscard]] std::vector<std::pair<std::string, Orientation>> series_ids() const {
    if (!cfg_.series.empty()) return cfg_.series;
    std::vector<std::pair<std::string, Orientation>> out;
    std::set<std::string> ids;
    for (const auto& q : raw_.quotes) ids.insert(q.series_id);
    for (const auto& id : ids) {
      auto it = raw_.align.orientation.find(id);
      out.emplace_back(id, it == raw_.align.orientation.end() ? Orientation::kRaw : it->second);
    }
    return out;
  }

  [[nodiscard]] Column m3_signal_values(const ModelFit& fit, const std::string& signal) const {
    Column out;
    const auto& col = (*panel_)[signal];
    for (auto r : fit.rows) out.push_back(lagged(col, r, 1));
    return out;
  }

  RunConfig cfg_;
  RawData raw_;
  std::optional<SimulatedData> sim_;
  std::optional<Panel> panel_;
  std::vector<std::string> grid_signals_;
  std::vector<SignalPair> pairs_;
};

/// All stages, then the report.
inline void run_all(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

namespace detail {

inline csv::Table read_artifact(const fs::path& dir, const std::string& rel) {
  std::ifstream in(dir / rel);
  if (!in) throw ValidationError("incomplete artifact set: missing " + rel);
  return csv::parse(in);
}

inline std::size_t column_index(const csv::Table& t, const std::string& name, const std::string& file) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw SchemaError(file + " has no column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

}  // namespace detail

inline constexpr const char* kReportName = "report.md";

/// Builds report.md from an artifact directory and refreshes the manifest.
/// Requires a manifest whose digests match the files on disk and the grid
/// output.
inline std::string report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("artifact directory '" + dir.string() + "' does not exist");
  const auto manifest = read_manifest(dir);
  for (const auto& [rel, digest] : manifest) {
    if (rel == kReportName) continue;
    if (!fs::exists(dir / rel)) throw ValidationError("incomplete artifact set: missing " + rel);
    if (sha256_hex(read_bytes(dir / rel)) != digest) throw ValidationError("artifact " + rel + " does not match its digest");
  }
  if (!manifest.contains("grid/long.csv")) throw ValidationError("incomplete artifact set: missing grid/long.csv");

  std::ostringstream md;
  md << "# Volatility signal report\n\n";

  const auto grid = detail::read_artifact(dir, "grid/long.csv");
  const auto gi = [&](const char* c) { return detail::column_index(grid, c, "grid/long.csv"); };
  const auto i_sig = gi("signal"), i_asset = gi("asset"), i_active = gi("active"), i_t = gi("t_stat"),
             i_p = gi("p_value"), i_bh = gi("bh_adjusted_p"), i_rej = gi("bh_rejected"), i_coef = gi("coefficient");
  std::size_t active = 0, rejected = 0;
  std::map<std::string, const csv::Row*> best;
  std::vector<std::string> asset_order;
  std::set<std::string> inactive_signals, active_signals;
  for (const auto& r : grid.rows) {
    const auto& a = r.fields[i_asset];
    if (std::find(asset_order.begin(), asset_order.end(), a) == asset_order.end()) asset_order.push_back(a);
    if (r.fields[i_active] != "1") {
      inactive_signals.insert(r.fields[i_sig]);
      continue;
    }
    active_signals.insert(r.fields[i_sig]);
    ++active;
    if (r.fields[i_rej] == "1") ++rejected;
    auto& b = best[a];
    if (!b || std::fabs(csv::parse_double(r.fields[i_t])) > std::fabs(csv::parse_double(b->fields[i_t]))) b = &r;
  }

  md << "## Signal grid\n\n";
  if (active == 0) {
    md << "no testable cells\n\n";
  } else {
    md << active << " of " << grid.rows.size() << " cells testable; " << rejected
       << " significant after Benjamini-Hochberg.\n\n";
    md << "Best signal per asset (largest |t|):\n\n| asset | signal | coefficient | t | p | BH p |\n|---|---|---|---|---|---|\n";
    for (const auto& a : asset_order) {
      auto it = best.find(a);
      if (it == best.end()) {
        md << "| " << a << " | - | | | | |\n";
        continue;
      }
      const auto& f = it->second->fields;
      md << "| " << a << " | " << f[i_sig] << " | " << f[i_coef] << " | " << f[i_t]
         << stats::stars(csv::parse_double(f[i_p])) << " | " << f[i_p] << " | " << f[i_bh] << " |\n";
    }
    md << '\n';
  }

  md << "## Coverage notes\n\n";
  std::vector<std::string> never;
  for (const auto& s : inactive_signals)
    if (!active_signals.contains(s)) never.push_back(s);
  if (never.empty()) {
    md << "All grid signals have at least one testable cell.\n\n";
  } else {
    md << "Inactive in every cell (coverage below threshold):";
    for (const auto& s : never) md << ' ' << s;
    md << "\n\n";
  }
  if (manifest.contains("signals/coverage.csv")) {
    const auto cov = detail::read_artifact(dir, "signals/coverage.csv");
    const auto ia = detail::column_index(cov, "asset", "signals/coverage.csv");
    const auto is = detail::column_index(cov, "series_id", "signals/coverage.csv");
    const auto iu = detail::column_index(cov, "usable", "signals/coverage.csv");
    const auto ifa = detail::column_index(cov, "first_active", "signals/coverage.csv");
    const auto ie = detail::column_index(cov, "excluded", "signals/coverage.csv");
    for (const auto& r : cov.rows)
      if (r.fields[ie] == "1")
        md << "- " << r.fields[is] << " excluded for " << r.fields[ia] << ": " << r.fields[iu]
           << " usable observations, first active " << r.fields[ifa] << '\n';
    md << '\n';
  }

  if (manifest.contains("estimate/effects.csv")) {
    const auto eff = detail::read_artifact(dir, "estimate/effects.csv");
    auto c = [&](const char* n) { return detail::column_index(eff, n, "estimate/effects.csv"); };
    md << "## In-sample models\n\n| asset | signal | coefficient | se | t | IQR effect | adj. R2 M2 -> M3 | n |\n"
          "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : eff.rows) {
      const auto& f = r.fields;
      md << "| " << f[c("asset")] << " | " << f[c("signal")] << " | " << f[c("coefficient")]
         << stats::stars(csv::parse_double(f[c("p_value")])) << " | " << f[c("std_error")] << " | " << f[c("t_stat")]
         << " | " << f[c("effect")] << " | " << f[c("adj_r2_m2")] << " -> " << f[c("adj_r2_m3")] << " | " << f[c("n")]
         << " |\n";
    }
    md << '\n';
  }

  if (manifest.contains("oos/summary.csv")) {
    const auto s = detail::read_artifact(dir, "oos/summary.csv");
    auto c = [&](const char* n) { return detail::column_index(s, n, "oos/summary.csv"); };
    md << "## Out-of-sample\n\n| asset | signal | n | OOS R2 | MSFE ratio | CW | CW p |\n|---|---|---|---|---|---|---|\n";
    for (const auto& r : s.rows) {
      const auto& f = r.fields;
      const auto p = f[c("cw_p")];
      md << "| " << f[c("asset")] << " | " << f[c("signal")] << " | " << f[c("n_oos")] << " | " << f[c("oos_r2")]
         << " | " << f[c("msfe_ratio")] << " | " << f[c("cw_stat")] << (p.empty() ? "" : stats::stars(csv::parse_double(p)))
         << " | " << p << " |\n";
    }
    md << '\n';
  }

  if (manifest.contains("robustness/report.csv")) {
    const auto rb = detail::read_artifact(dir, "robustness/report.csv");
    auto c = [&](const char* n) { return detail::column_index(rb, n, "robustness/report.csv"); };
    md << "## Robustness\n\n| asset | signal | check | term | estimate | t | p | n |\n|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rb.rows) {
      const auto& f = r.fields;
      const auto p = f[c("p_value")];
      md << "| " << f[c("asset")] << " | " << f[c("signal")] << " | " << f[c("check")] << " | " << f[c("term")] << " | "
         << f[c("estimate")] << (p.empty() ? "" : stats::stars(csv::parse_double(p))) << " | " << f[c("t_stat")]
         << " | " << p << " | " << f[c("n")] << " |\n";
    }
    md << '\n';
  }
  md << "Stars: *** p<0.01, ** p<0.05, * p<0.10.\n";

  const auto text = md.str();
  {
    std::ofstream out(dir / kReportName, std::ios::binary);
    if (!out) throw IoError("cannot write report in '" + dir.string() + "'");
    out << text;
  }
  write_manifest(dir);
  return text;
}

inline void run_all(const RunConfig& cfg) {
  Pipeline p(cfg);
  p.run(Stage::kRobustness, {Stage::kIngest, Stage::kSignals, Stage::kEstimate, Stage::kGrid, Stage::kOos,
                             Stage::kRobustness});
  detail::in_stage("report", [&] { report(cfg.output); });
}

}  // namespace pmvol
