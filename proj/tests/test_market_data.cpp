#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pmvol/align.hpp"
#include "pmvol/market_data.hpp"

using namespace pmvol;

namespace {

const std::string kQuoteHeader = "series_id,contract_id,date,close_prob,dollar_volume,open_interest\n";

}  // namespace

TEST(Ingest, AcceptsValidQuotesAndRejectsBadRows) {
  std::istringstream in(kQuoteHeader +
                        "KXFED,FED-A,2024-03-01,0.42,1000,5000\n"
                        "KXFED,FED-A,2024-03-04,1.20,1000,5000\n"    // prob > 1
                        "KXFED,FED-B,2024-03-04,0.40,-5,5000\n"      // negative volume
                        "KXFED,FED-A,2024-03-01,0.43,1000,5000\n"    // duplicate key
                        "KXFED,FED-C,2024-03-04,0.10,1000\n"         // short row
                        "KXFED,FED-C,2024-13-04,0.10,1000,1\n"       // bad date
                        "KXFED,FED-C,2024-03-05,0.10,,1\n");         // missing volume
  const auto r = ingest_contract_quotes(in);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].contract_id, "FED-A");
  ASSERT_EQ(r.rejections.size(), 6u);
  EXPECT_EQ(r.rejections[0].line, 3u);
  EXPECT_NE(r.rejections[0].reason.find("close_prob"), std::string::npos);
  EXPECT_NE(r.rejections[2].reason.find("duplicate"), std::string::npos);
}

TEST(Ingest, HeaderMismatchIsASchemaError) {
  std::istringstream in("series,contract_id,date,close_prob,dollar_volume,open_interest\n");
  EXPECT_THROW((void)ingest_contract_quotes(in), SchemaError);
  std::istringstream prices("asset_id,date\n");
  EXPECT_THROW((void)ingest_prices(prices), SchemaError);
}

TEST(Ingest, PricesAndControls) {
  std::istringstream p("asset_id,date,close\nBTC,2024-01-02,45000\nBTC,2024-01-03,0\nETH,2024-01-02,2300\n");
  const auto pr = ingest_prices(p);
  EXPECT_EQ(pr.records.size(), 2u);
  EXPECT_EQ(pr.rejections.size(), 1u);
  std::istringstream c(
      "date,vix_level,dxy_return,spx_return,ff_implied_change,ust10y_return,dvol_level\n"
      "2024-01-02,13.2,0.001,-0.002,,,\n"
      "2024-01-03,-1,0.001,-0.002,,,\n");
  const auto cr = ingest_controls(c);
  ASSERT_EQ(cr.records.size(), 1u);
  EXPECT_TRUE(is_missing(cr.records[0].ff_implied_change));
  EXPECT_EQ(cr.rejections.size(), 1u);
}

TEST(Ingest, MissingFileIsAnIoError) {
  EXPECT_THROW((void)ingest_prices("/nonexistent/prices.csv"), IoError);
}

TEST(Ingest, WritersProduceIngestableFiles) {
  std::vector<ContractQuote> q = {{"KXCPI", "CPI-1", Date(2024, 5, 1), 0.3125, 1500, 20000}};
  std::stringstream s;
  write_quotes(s, q);
  const auto back = ingest_contract_quotes(s);
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_EQ(back.records[0].close_prob, 0.3125);
  EXPECT_EQ(back.records[0].date, Date(2024, 5, 1));
}

TEST(Calendar, ShippedHolidayList2024Has252TradingDays) {
  const auto holidays = load_holidays(std::string(PMVOL_SOURCE_DIR) + "/data/us_holidays.txt");
  const auto cal = build_calendar(Date(2024, 1, 1), Date(2024, 12, 31), holidays);
  EXPECT_EQ(cal.size(), 252u);
  EXPECT_FALSE(cal.contains(Date(2024, 3, 29)));  // Good Friday
  const auto cal25 = build_calendar(Date(2025, 1, 6), Date(2025, 1, 10), holidays);
  EXPECT_EQ(cal25.size(), 4u);  // market closed on 2025-01-09
}

TEST(Calendar, RejectsInvertedRangeAndWeekendDates) {
  EXPECT_THROW((void)build_calendar(Date(2024, 2, 1), Date(2024, 1, 1), {}), ValidationError);
  EXPECT_THROW(TradingCalendar({Date(2024, 6, 1)}), ValidationError);
  std::istringstream h("# comment\n2024-01-01  # new year\n\n");
  EXPECT_EQ(read_holidays(h).size(), 1u);
}

TEST(Align, LogReturnsReconstructPricesAcrossWeekends) {
  const auto cal = build_calendar(Date(2024, 1, 2), Date(2024, 1, 12), {});
  std::vector<PriceBar> bars;
  double price = 100.0;
  for (const auto& d : cal.dates()) {
    bars.push_back({"BTC", d, price});
    price *= 1.0 + 0.01 * static_cast<double>(d.serial() % 5) - 0.015;
  }
  bars.push_back({"BTC", Date(2024, 1, 6), 999.0});  // Saturday: off-calendar, ignored
  const auto p = align_panel({}, bars, {}, cal);
  const auto& r = p[return_column("BTC")];
  EXPECT_TRUE(is_missing(r[0]));
  double sum = 0.0;
  for (std::size_t t = 1; t < r.size(); ++t) sum += r[t];
  const auto& c = p[close_column("BTC")];
  EXPECT_NEAR(std::exp(sum) * c.front(), c.back(), 1e-9 * c.back());
  // Friday -> Monday is one return.
  const auto fri = *p.row_of(Date(2024, 1, 5));
  EXPECT_NEAR(r[fri + 1], std::log(c[fri + 1] / c[fri]), 1e-15);
}

TEST(Align, MissingPriceLeavesNeighbouringReturnsMissing) {
  const auto cal = build_calendar(Date(2024, 1, 2), Date(2024, 1, 5), {});
  std::vector<PriceBar> bars = {{"ETH", Date(2024, 1, 2), 10}, {"ETH", Date(2024, 1, 4), 11}, {"ETH", Date(2024, 1, 5), 12}};
  const auto p = align_panel({}, bars, {}, cal);
  const auto& r = p[return_column("ETH")];
  EXPECT_TRUE(is_missing(r[1]));
  EXPECT_TRUE(is_missing(r[2]));
  EXPECT_NEAR(r[3], std::log(12.0 / 11.0), 1e-15);
}

TEST(Align, OptionalControlsOnlyWhenPresent) {
  const auto cal = build_calendar(Date(2024, 1, 2), Date(2024, 1, 3), {});
  ControlRecord a{Date(2024, 1, 2), 13.0, 0.001, 0.002, kMissing, kMissing, kMissing};
  ControlRecord b{Date(2024, 1, 3), 14.0, 0.001, 0.002, kMissing, 0.01, kMissing};
  const auto p = align_panel({}, {}, std::vector<ControlRecord>{a, b}, cal);
  EXPECT_TRUE(p.has(kVix));
  EXPECT_TRUE(p.has(kUst10yRet));
  EXPECT_FALSE(p.has(kFfChange));
  EXPECT_FALSE(p.has(kDvol));
}

TEST(Align, NoOverlapWithCalendarIsAnError) {
  const auto cal = build_calendar(Date(2024, 1, 2), Date(2024, 1, 3), {});
  std::vector<PriceBar> bars = {{"BTC", Date(2023, 1, 3), 10}};
  EXPECT_THROW((void)align_panel({}, bars, {}, cal), ValidationError);
  EXPECT_THROW((void)align_panel({}, bars, {}, TradingCalendar{}), ValidationError);
}
