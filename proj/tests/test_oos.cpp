#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pmvol/oos.hpp"
#include "pmvol/rng.hpp"

using namespace pmvol;

namespace {

ForecastRecord rec(double y, double yb, double ya) {
  ForecastRecord r;
  r.y_true = y;
  r.yhat_baseline = yb;
  r.yhat_augmented = ya;
  r.e_baseline = y - yb;
  r.e_augmented = y - ya;
  r.mean_benchmark = 0.0;
  return r;
}

std::vector<ForecastRecord> random_records(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<ForecastRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = rec(rng.normal(), 0.3 * rng.normal(), 0.3 * rng.normal());
    r.mean_benchmark = 0.1 * rng.normal();
    out.push_back(r);
  }
  return out;
}

Panel toy_panel(std::size_t n, std::uint64_t seed) {
  std::vector<Date> dates;
  for (std::size_t t = 0; t < n; ++t) dates.push_back(Date(2024, 1, 1).plus_days(static_cast<int>(t)));
  Panel p(dates);
  Rng rng(seed);
  Column x(n), s(n), y(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = rng.normal();
    s[t] = rng.normal();
  }
  for (std::size_t t = 0; t < n; ++t) y[t] = 1.0 + 0.5 * x[t] + (t > 0 ? 0.4 * s[t - 1] : 0.0) + 0.3 * rng.normal();
  p.set("x", x);
  p.set("s", s);
  p.set("y", y);
  return p;
}

const ModelSpec kBase{"b", "y", {{"x", 0}}, HacCovariance{2}, 5};
const ModelSpec kAug{"a", "y", {{"x", 0}, {"s", 1}}, HacCovariance{2}, 5};

}  // namespace

TEST(MsfeRatio, HandBuiltRecords) {
  const std::vector<ForecastRecord> r = {rec(1, 0, 0), rec(2, 0, 1), rec(2, 0, 0)};
  EXPECT_NEAR(msfe_ratio(r), 6.0 / 9.0, 1e-15);
  const std::vector<ForecastRecord> same = {rec(1, 0.5, 0.5), rec(2, 1, 1)};
  EXPECT_DOUBLE_EQ(msfe_ratio(same), 1.0);
  const std::vector<ForecastRecord> perfect = {rec(1, 0, 1), rec(2, 1, 2)};
  EXPECT_DOUBLE_EQ(msfe_ratio(perfect), 0.0);
  EXPECT_DOUBLE_EQ(oos_r2(perfect), 1.0);
}

TEST(MsfeRatio, DegenerateInputs) {
  EXPECT_THROW((void)msfe_ratio(std::vector<ForecastRecord>{}), ValidationError);
  EXPECT_THROW((void)msfe_ratio(std::vector<ForecastRecord>{rec(1, 1, 0)}), ComputationError);
  std::vector<ForecastRecord> r = {rec(0, 1, 0)};
  EXPECT_THROW((void)oos_r2(r), ComputationError);
}

TEST(Cssed, HandBuiltPathAndTelescoping) {
  const std::vector<ForecastRecord> r = {rec(2, 0, 1), rec(2, 1, 0)};
  EXPECT_EQ(cssed(r), (std::vector<double>{3.0, 0.0}));
  const auto recs = random_records(3, 200);
  const auto path = cssed(recs);
  for (std::size_t k = 1; k < recs.size(); ++k) {
    const auto& x = recs[k];
    EXPECT_NEAR(path[k] - path[k - 1], x.e_baseline * x.e_baseline - x.e_augmented * x.e_augmented, 1e-12);
  }
  EXPECT_EQ(path.back() > 0.0, msfe_ratio(recs) < 1.0);
}

TEST(ClarkWest, IdenticalModelsGiveZeroStatistic) {
  std::vector<ForecastRecord> r;
  for (int i = 0; i < 40; ++i) r.push_back(rec(i * 0.1, 0.2, 0.2));
  const auto cw = clark_west(r, 5);
  EXPECT_EQ(cw.stat, 0.0);
  EXPECT_EQ(cw.p_value, 0.5);
  EXPECT_THROW((void)clark_west(std::span(r).first(29), 5), ValidationError);
}

TEST(ClarkWest, MatchesOracleHacOnAConstant) {
  const auto recs = random_records(4, 80);
  const auto f = clark_west_terms(recs);
  double m = 0.0;
  for (double v : f) m += v;
  m /= static_cast<double>(f.size());
  oracle::Matrix x(f.size(), oracle::Vector{1.0});
  oracle::Vector e;
  for (double v : f) e.push_back(v - m);
  for (int h : {1, 3, 5}) {
    const double se = std::sqrt(oracle::newey_west(x, e, h - 1, true)[0][0]);
    const auto cw = clark_west(recs, h);
    EXPECT_NEAR(cw.stat, m / se, 1e-10);
    EXPECT_NEAR(cw.p_value, 0.5 * std::erfc(cw.stat / std::sqrt(2.0)), 1e-12);
  }
}

TEST(ClarkWest, SwappingModelsAddsTwiceTheSquaredGap) {
  // f(a,b) + f(b,a) = 2 (yhat_b - yhat_a)^2 term by term.
  auto recs = random_records(5, 60);
  auto swapped = recs;
  for (auto& r : swapped) {
    std::swap(r.yhat_baseline, r.yhat_augmented);
    std::swap(r.e_baseline, r.e_augmented);
  }
  const auto f = clark_west_terms(recs);
  const auto g = clark_west_terms(swapped);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = recs[i].yhat_baseline - recs[i].yhat_augmented;
    EXPECT_NEAR(f[i] + g[i], 2.0 * d * d, 1e-12);
  }
  EXPECT_NEAR(cssed(recs).back(), -cssed(swapped).back(), 1e-12);
}

TEST(ExpandingForecasts, FirstForecastMatchesHandRefit) {
  const auto p = toy_panel(140, 6);
  const OosOptions opt{120};
  const auto records = expanding_forecasts(kBase, kAug, p, opt);
  ASSERT_FALSE(records.empty());
  const auto& first = records.front();
  // usable rows start at 1 (lagged signal); origin is the 121st usable row.
  EXPECT_EQ(first.row, 121u);
  oracle::Matrix x;
  oracle::Vector y;
  for (std::size_t r = 1; r + 5 <= first.row; ++r) {
    x.push_back({1.0, p["x"][r], p["s"][r - 1]});
    y.push_back(p["y"][r]);
  }
  const auto b = oracle::normal_equations(x, y);
  const auto t = first.row;
  EXPECT_NEAR(first.yhat_augmented, b[0] + b[1] * p["x"][t] + b[2] * p["s"][t - 1], 1e-10);
  double m = 0.0;
  for (double v : y) m += v;
  EXPECT_NEAR(first.mean_benchmark, m / static_cast<double>(y.size()), 1e-12);
  EXPECT_EQ(records.size(), 140u - 121u);
}

TEST(ExpandingForecasts, BoundaryProducesOneRecord) {
  const auto p = toy_panel(122, 7);  // 121 usable rows
  EXPECT_EQ(expanding_forecasts(kBase, kAug, p).size(), 1u);
  const auto q = toy_panel(121, 7);
  EXPECT_THROW((void)expanding_forecasts(kBase, kAug, q), ValidationError);
}

TEST(ExpandingForecasts, MutatingTheFutureLeavesEarlierForecastsUnchanged) {
  const auto p = toy_panel(200, 8);
  const auto base = expanding_forecasts(kBase, kAug, p);
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = static_cast<std::size_t>(rng.below(base.size()));
    const auto t = base[k].row;
    auto q = p;
    for (std::size_t r = t + 1; r < q.rows(); ++r)
      for (const auto* c : {"x", "s", "y"}) q.set_cell(c, r, 100.0 * rng.normal());
    const auto mutated = expanding_forecasts(kBase, kAug, q);
    for (std::size_t i = 0; i <= k; ++i) {
      EXPECT_EQ(mutated[i].yhat_baseline, base[i].yhat_baseline);
      EXPECT_EQ(mutated[i].yhat_augmented, base[i].yhat_augmented);
      EXPECT_EQ(mutated[i].mean_benchmark, base[i].mean_benchmark);
    }
  }
}

TEST(ExpandingForecasts, SpecMismatchIsRejected) {
  const auto p = toy_panel(150, 9);
  auto other = kAug;
  other.target = "x";
  EXPECT_THROW((void)expanding_forecasts(kBase, other, p), ValidationError);
  other = kAug;
  other.horizon = 3;
  EXPECT_THROW((void)expanding_forecasts(kBase, other, p), ValidationError);
}

TEST(OosR2, InvariantToRedating) {
  auto recs = random_records(10, 50);
  const double r2 = oos_r2(recs);
  for (std::size_t i = 0; i < recs.size(); ++i) recs[i].date = Date(2030, 1, 1).plus_days(static_cast<int>(7 * i));
  EXPECT_DOUBLE_EQ(oos_r2(recs), r2);
}

TEST(OosSummary, SchemaOfTheSummaryRow) {
  const std::vector<OosSummaryRow> rows = {{"BTC", "KXFED.dir", evaluate_oos(random_records(11, 40), 5)}};
  std::ostringstream out;
  write_oos_summary(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "asset,signal,n_oos,oos_r2,msfe_ratio,cw_stat,cw_p");
  EXPECT_NE(out.str().find("BTC,KXFED.dir,40,"), std::string::npos);
}
