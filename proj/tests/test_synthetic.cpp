#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "pmvol/regression.hpp"
#include "pmvol/synthetic.hpp"

using namespace pmvol;

TEST(SyntheticConfig, ParsesListsAndRejectsUnknownKeys) {
  std::istringstream in(
      "seed = 9\nn_days = 200\nassets = BTC,ETH\nseries = KXFED:dovish,KXCPI\n"
      "series_windows = KXCPI:100:199\ninject = BTC:KXFED.dir:0.5;ETH:KXCPI.abs:1.2\n");
  const auto c = read_synthetic_config(in);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.n_days, 200u);
  EXPECT_EQ(c.assets, (std::vector<std::string>{"BTC", "ETH"}));
  ASSERT_EQ(c.series.size(), 2u);
  EXPECT_EQ(c.series[0].orientation, Orientation::kDovish);
  EXPECT_EQ(c.series[1].orientation, Orientation::kRaw);
  EXPECT_EQ(c.series[1].first_row, 100);
  ASSERT_EQ(c.injections.size(), 2u);
  EXPECT_DOUBLE_EQ(c.injections[1].coefficient, 1.2);

  std::istringstream bad("sed = 1\n");
  EXPECT_THROW((void)read_synthetic_config(bad), ValidationError);
  std::istringstream neg("n_days = -3\n");
  EXPECT_THROW((void)read_synthetic_config(neg), ValidationError);
  std::istringstream window("series_windows = NOPE:1:2\n");
  EXPECT_THROW((void)read_synthetic_config(window), ValidationError);
  EXPECT_THROW((void)load_synthetic_config("/nonexistent/file.ini"), IoError);
}

TEST(SyntheticConfig, DeltaOverridesTheFirstInjection) {
  std::istringstream in("delta = 0\n");
  EXPECT_DOUBLE_EQ(read_synthetic_config(in).injections.front().coefficient, 0.0);
}

TEST(Announcements, EventDaysCarryTheConfiguredVarianceRatio) {
  SyntheticConfig cfg;
  cfg.signal_scale = 1.0;
  const auto dates = detail::weekdays_from(Date(2020, 1, 1), 6000);
  Rng rng(5);
  const auto sig = simulate_announcement_signal(cfg, dates, rng);
  std::vector<double> ev, rest;
  std::size_t e = 0;
  for (std::size_t t = 0; t < dates.size(); ++t) {
    if (e < sig.events.size() && dates[t] == sig.events[e]) {
      ev.push_back(sig.shocks[t]);
      ++e;
    } else {
      rest.push_back(sig.shocks[t]);
    }
  }
  EXPECT_EQ(e, sig.events.size());
  EXPECT_GT(ev.size(), 250u);
  for (const auto& d : sig.events) EXPECT_GE(d.day(), 12u);
  const double ratio = std::pow(stats::sample_sd(ev) / stats::sample_sd(rest), 2);
  EXPECT_NEAR(ratio, 5.0, 1.0);
}

TEST(GarchSimulation, RejectsNonStationaryParameters) {
  EXPECT_THROW((void)simulate_garch_returns(1e-6, 0.5, 0.5, 10, 1), ValidationError);
  EXPECT_THROW((void)simulate_garch_returns(0.0, 0.1, 0.5, 10, 1), ValidationError);
  const auto a = simulate_garch_returns(1e-6, 0.08, 0.9, 100, 3);
  EXPECT_EQ(a, simulate_garch_returns(1e-6, 0.08, 0.9, 100, 3));
}

TEST(SimulatePanel, DeterministicPerSeed) {
  SyntheticConfig cfg;
  cfg.n_days = 150;
  const auto a = simulate_panel(cfg);
  const auto b = simulate_panel(cfg);
  std::ostringstream sa, sb;
  write_panel(sa, a.panel);
  write_panel(sb, b.panel);
  EXPECT_EQ(sa.str(), sb.str());
  cfg.seed += 1;
  std::ostringstream sc;
  write_panel(sc, simulate_panel(cfg).panel);
  EXPECT_NE(sa.str(), sc.str());
}

TEST(SimulatePanel, ColumnsAndTargetTail) {
  SyntheticConfig cfg;
  cfg.n_days = 120;
  const auto sim = simulate_panel(cfg);
  const auto& p = sim.panel;
  for (const auto* c : {"BTC.close", "BTC.ret", "BTC.rvol5", "BTC.logrvol5", "BTC.har1", "KXFED.vw", "KXFED.dir",
                        "KXFED.abs", "KXFED.ema5", "vix", "dxy_ret", "spx_ret"})
    EXPECT_TRUE(p.has(c)) << c;
  const auto& y = p["BTC.rvol5"];
  for (std::size_t t = p.rows() - 5; t < p.rows(); ++t) EXPECT_TRUE(is_missing(y[t]));
  EXPECT_FALSE(is_missing(y[p.rows() - 6]));
  EXPECT_EQ(sim.truth.events, sim.raw.events);
}

TEST(SimulatePanel, LadderRecoversThePlantedCoefficient) {
  SyntheticConfig cfg;
  cfg.n_days = 1178;
  const auto p = simulate_panel(cfg).panel;
  const auto fit = estimate(signal_spec("BTC", "KXFED.dir"), p);
  EXPECT_NEAR(fit.coefficient("L1.KXFED.dir"), 0.639, 0.25);
  EXPECT_NEAR(stats::mean(stats::present(p["BTC.rvol5"])), 0.634, 0.05);
}

TEST(SimulatePanel, RawFilesRoundTrip) {
  SyntheticConfig cfg;
  cfg.n_days = 60;
  const auto sim = simulate_panel(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "pmvol_raw_roundtrip";
  std::filesystem::remove_all(dir);
  const auto files = write_raw_data(sim.raw, dir);
  for (const auto& f : files) EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  const auto quotes = ingest_contract_quotes((dir / "quotes.csv").string());
  EXPECT_EQ(quotes.records.size(), sim.raw.quotes.size());
  EXPECT_TRUE(quotes.rejections.empty());
  std::filesystem::remove_all(dir);
}
