#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "pmvol/align.hpp"
#include "pmvol/rng.hpp"
#include "pmvol/signals.hpp"

using namespace pmvol;

namespace {

TradingCalendar week() { return build_calendar(Date(2024, 3, 4), Date(2024, 3, 8), {}); }

ContractQuote q(const std::string& contract, Date d, double p, double v) { return {"KXFED", contract, d, p, v, 1000}; }

}  // namespace

TEST(ActiveSet, NeedsClosesOnBothAdjacentDays) {
  const auto cal = week();
  const auto& d = cal.dates();
  std::vector<ContractQuote> quotes = {
      q("A", d[0], 0.50, 10), q("A", d[1], 0.52, 10),  // both days
      q("B", d[1], 0.30, 10),                          // newly listed on d1
      q("C", d[0], 0.70, 10),                          // expired after d0
  };
  EXPECT_EQ(active_set(quotes, "KXFED", cal, d[1]), std::vector<std::string>{"A"});
  EXPECT_TRUE(active_set(quotes, "KXFED", cal, d[0]).empty());
  EXPECT_TRUE(active_set(quotes, "KXCPI", cal, d[1]).empty());
}

TEST(ActiveSet, ThreeContractsOneExpiring) {
  const auto cal = week();
  const auto& d = cal.dates();
  std::vector<ContractQuote> quotes = {q("A", d[1], 0.1, 1), q("A", d[2], 0.2, 1), q("B", d[1], 0.1, 1),
                                       q("B", d[2], 0.2, 1), q("C", d[0], 0.1, 1), q("C", d[1], 0.1, 1)};
  EXPECT_EQ(active_set(quotes, "KXFED", cal, d[2]), (std::vector<std::string>{"A", "B"}));
}

TEST(VolumeWeightedDelta, HandExamples) {
  const auto cal = week();
  const auto& d = cal.dates();
  std::vector<ContractQuote> one = {q("A", d[0], 0.40, 50), q("A", d[1], 0.45, 100)};
  EXPECT_NEAR(volume_weighted_delta(one, "KXFED", cal, d[1]), 0.05, 1e-15);

  std::vector<ContractQuote> two = {q("A", d[0], 0.40, 1), q("A", d[1], 0.44, 100), q("B", d[0], 0.60, 1),
                                    q("B", d[1], 0.58, 300)};
  EXPECT_NEAR(volume_weighted_delta(two, "KXFED", cal, d[1]), -0.005, 1e-15);

  std::vector<ContractQuote> idle = {q("A", d[0], 0.40, 0), q("A", d[1], 0.44, 0), q("B", d[0], 0.6, 0),
                                     q("B", d[1], 0.58, 0)};
  EXPECT_TRUE(is_missing(volume_weighted_delta(idle, "KXFED", cal, d[1])));
  EXPECT_TRUE(is_missing(volume_weighted_delta(two, "KXFED", cal, d[0])));
}

TEST(VolumeWeightedDelta, BoundedAndScaleInvariant) {
  const auto cal = week();
  const auto& d = cal.dates();
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ContractQuote> a, b;
    double lo = 1.0, hi = -1.0;
    const int k = 1 + static_cast<int>(rng.below(6));
    for (int j = 0; j < k; ++j) {
      const double p0 = 0.05 + 0.9 * rng.uniform(), p1 = 0.05 + 0.9 * rng.uniform();
      const double v = 1.0 + 1000.0 * rng.uniform();
      const auto id = "C" + std::to_string(j);
      a.push_back(q(id, d[0], p0, v));
      a.push_back(q(id, d[1], p1, v));
      b.push_back(q(id, d[0], p0, 7.5 * v));
      b.push_back(q(id, d[1], p1, 7.5 * v));
      lo = std::min(lo, p1 - p0);
      hi = std::max(hi, p1 - p0);
    }
    const double x = volume_weighted_delta(a, "KXFED", cal, d[1]);
    EXPECT_GE(x, lo - 1e-15);
    EXPECT_LE(x, hi + 1e-15);
    EXPECT_LE(std::fabs(x), std::max(std::fabs(lo), std::fabs(hi)) + 1e-15);
    EXPECT_NEAR(volume_weighted_delta(b, "KXFED", cal, d[1]), x, 1e-14);
  }
}

TEST(Directional, SignConventions) {
  EXPECT_DOUBLE_EQ(directional_signal(-0.03, Orientation::kDovish), 0.03);
  EXPECT_DOUBLE_EQ(directional_signal(0.0, Orientation::kDovish), 0.0);
  EXPECT_DOUBLE_EQ(directional_signal(0.02, Orientation::kRaw), 0.02);
  EXPECT_TRUE(is_missing(directional_signal(kMissing, Orientation::kRaw)));
  EXPECT_EQ(parse_orientation("inverted"), Orientation::kDovish);
  EXPECT_THROW((void)parse_orientation("hawkish"), ValidationError);
}

TEST(Ema, RecursionSeedsAtFirstObservation) {
  const std::vector<double> c(6, 0.7);
  for (double v : ema_signal(c)) EXPECT_DOUBLE_EQ(v, 0.7);
  const auto e = ema_signal(std::vector<double>{0, 0, 0, 0, 0.3});
  EXPECT_NEAR(e.back(), 0.1, 1e-15);
  EXPECT_TRUE(ema_signal(std::vector<double>{}).empty());
  EXPECT_THROW((void)ema_signal(c, 0), ValidationError);

  const auto m = ema_signal(std::vector<double>{kMissing, 0.2, kMissing, 0.5});
  EXPECT_TRUE(is_missing(m[0]));
  EXPECT_DOUBLE_EQ(m[1], 0.2);
  EXPECT_TRUE(is_missing(m[2]));
  EXPECT_NEAR(m[3], 0.5 / 3.0 + 0.2 * 2.0 / 3.0, 1e-15);
}

TEST(Ema, StaysWithinObservedRange) {
  Rng rng(5);
  std::vector<double> x(200);
  for (auto& v : x) v = rng.uniform() < 0.2 ? kMissing : rng.normal();
  const auto p = stats::present(x);
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  for (double v : stats::present(ema_signal(x))) {
    EXPECT_GE(v, *lo);
    EXPECT_LE(v, *hi);
  }
}

TEST(Composite, MeanOfPresentAbsoluteSignals) {
  SignalSeries a, b;
  a.abs_delta = {0.02, kMissing, kMissing, 0.04};
  b.abs_delta = {0.06, 0.04, kMissing, 0.04};
  const std::vector<SignalSeries> all = {a, b};
  const auto c = composite_column(all);
  EXPECT_NEAR(c[0], 0.04, 1e-15);
  EXPECT_NEAR(c[1], 0.04, 1e-15);
  EXPECT_TRUE(is_missing(c[2]));
  EXPECT_NEAR(c[3], 0.04, 1e-15);
}

TEST(Coverage, LagArithmeticAndExclusion) {
  SignalSeries full, never, sparse;
  const auto cal = build_calendar(Date(2024, 1, 1), Date(2024, 5, 31), {});
  std::vector<Date> dates(cal.dates().begin(), cal.dates().begin() + 100);
  full.series_id = "FULL";
  full.dates = dates;
  full.abs_delta.assign(100, 0.01);
  never.series_id = "KXUSNFP";
  never.dates = dates;
  never.abs_delta.assign(100, kMissing);
  sparse.series_id = "KXRATECUT";
  sparse.dates = dates;
  sparse.abs_delta.assign(100, kMissing);
  for (std::size_t t = 65; t < 94; ++t) sparse.abs_delta[t] = 0.02;  // row 65 is 2024-04-01
  const std::vector<double> returns(100, 0.001);
  const auto rows = coverage_report(std::vector<SignalSeries>{full, never, sparse}, returns);
  EXPECT_EQ(rows[0].usable, 99u);
  EXPECT_FALSE(rows[0].excluded);
  EXPECT_EQ(rows[0].first_active, "2024-Q1");
  EXPECT_EQ(rows[1].usable, 0u);
  EXPECT_EQ(rows[1].first_active, "Never active");
  EXPECT_TRUE(rows[1].excluded);
  EXPECT_EQ(rows[2].usable, 29u);
  EXPECT_TRUE(rows[2].excluded);
  EXPECT_EQ(rows[2].first_active, "2024-Q2");
}

TEST(SignalPanel, ColumnsNamedBySeriesAndVariant) {
  const auto cal = week();
  const auto& d = cal.dates();
  std::vector<ContractQuote> quotes = {q("A", d[0], 0.40, 10), q("A", d[1], 0.37, 10), q("A", d[2], 0.41, 10)};
  AlignOptions o;
  o.orientation["KXFED"] = Orientation::kDovish;
  const auto p = align_panel(quotes, {}, {}, cal, o);
  EXPECT_NEAR(p["KXFED.vw"][1], -0.03, 1e-15);
  EXPECT_NEAR(p["KXFED.dir"][1], 0.03, 1e-15);
  EXPECT_NEAR(p["KXFED.abs"][2], 0.04, 1e-15);
  EXPECT_NEAR(p["KXFED.ema5"][2], 0.04 / 3.0 + 0.03 * 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[kCompositeColumn][1], 0.03, 1e-15);
  EXPECT_TRUE(is_missing(p["KXFED.vw"][3]));  // no quote on d3: no stale carry-forward
}
