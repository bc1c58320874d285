#include <filesystem>

#include <gtest/gtest.h>

#include "flowlab/error.hpp"
#include "flowlab/flows.hpp"
#include "flowlab/panel.hpp"
#include "oracles.hpp"

using namespace flowlab;
using flowlab::testing::record;

namespace {

constexpr const char* kHeader =
    "ticker,date,open,high,low,close,volume,net_buy_foreign,net_buy_inst,net_buy_indiv,market_cap\n";

template <typename F>
std::string error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return "none";
}

// n consecutive weekdays starting at `start` for one ticker.
std::vector<panel::PanelRecord> run_of(const std::string& ticker, Date start, int n, double cap = 1e11) {
  std::vector<panel::PanelRecord> out;
  Date d = is_weekday(start) ? start : next_weekday(start);
  for (int i = 0; i < n; ++i) {
    const double foreign = 1e6 * (i % 3 - 1);
    const double inst = 2e6 + 1e5 * (i % 5);
    auto r = record(ticker, format_date(d), 100.0 + i, cap, foreign, inst, -(foreign + inst));
    out.push_back(r);
    d = next_weekday(d + std::chrono::days{1});
  }
  return out;
}

}  // namespace

TEST(Ingest, WellFormedRowsBecomeRecords) {
  const std::string csv = std::string(kHeader) +
                          "AAA,2021-01-04,10,11,9,10.5,100,1,2,-3,1e11\n"
                          "AAA,2021-01-05,10.5,12,10,11,200,4,5,-9,1.1e11\n"
                          "AAA,2021-01-06,11,11.5,10.5,11.2,150,-1,0,1,1.2e11\n";
  const auto result = panel::ingest_csv_text(csv);
  EXPECT_EQ(result.panel.size(), 3u);
  EXPECT_EQ(result.panel.universe().size(), 1u);
  EXPECT_EQ(result.panel.calendar().size(), 3u);
  EXPECT_EQ(result.rejected, 0u);
  EXPECT_DOUBLE_EQ(result.panel.records()[1].net_buy_individual, -9.0);
}

TEST(Ingest, ZeroMarketCapRowIsRejectedAndCounted) {
  const std::string csv = std::string(kHeader) +
                          "AAA,2021-01-04,10,11,9,10.5,100,1,2,-3,1e11\n"
                          "AAA,2021-01-05,10.5,12,10,11,200,4,5,-9,0\n";
  const auto result = panel::ingest_csv_text(csv);
  EXPECT_EQ(result.panel.size(), 1u);
  EXPECT_EQ(result.rejected, 1u);
  ASSERT_EQ(result.rejections.size(), 1u);
  EXPECT_EQ(result.rejections[0].first, 3u);
}

TEST(Ingest, HighBelowCloseIsRejected) {
  const std::string csv = std::string(kHeader) + "AAA,2021-01-04,10,10.2,9,10.5,100,1,2,-3,1e11\n";
  EXPECT_EQ(panel::ingest_csv_text(csv).rejected, 1u);
}

TEST(Ingest, DuplicateKeyIsAnError) {
  const std::string csv = std::string(kHeader) +
                          "AAA,2021-01-04,10,11,9,10.5,100,1,2,-3,1e11\n"
                          "AAA,2021-01-04,10,11,9,10.5,100,1,2,-3,1e11\n";
  EXPECT_EQ(error_kind([&] { (void)panel::ingest_csv_text(csv); }), "DuplicateKey");
}

TEST(Ingest, MissingColumnNamesTheColumn) {
  const std::string csv = "ticker,date,open,high,low,close,volume,net_buy_foreign,net_buy_inst,market_cap\n";
  try {
    (void)panel::ingest_csv_text(csv);
    FAIL() << "expected MissingColumn";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "MissingColumn");
    EXPECT_NE(std::string(e.what()).find("net_buy_indiv"), std::string::npos);
  }
}

TEST(Ingest, UnparseableRowReportsLine) {
  const std::string csv = std::string(kHeader) + "AAA,2021-01-04,10,11,9,abc,100,1,2,-3,1e11\n";
  try {
    (void)panel::ingest_csv_text(csv);
    FAIL() << "expected UnparseableRow";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "UnparseableRow");
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_EQ(error_kind([&] {
              (void)panel::ingest_csv_text(std::string(kHeader) + "AAA,2021-02-30,10,11,9,10,1,1,2,-3,1e11\n");
            }),
            "UnparseableRow");
  EXPECT_EQ(error_kind([&] {
              (void)panel::ingest_csv_text(std::string(kHeader) + "AAA,2021-01-04,10,11,9,10,1.5,1,2,-3,1e11\n");
            }),
            "UnparseableRow");
}

TEST(Ingest, CustomColumnMapping) {
  const std::string csv =
      "code,day,o,h,l,c,v,f,i,p,mc\n"
      "AAA,2021-01-04,10,11,9,10.5,100,1,2,-3,1e11\n";
  panel::ColumnMapping m;
  m.ticker = "code";
  m.date = "day";
  m.open = "o";
  m.high = "h";
  m.low = "l";
  m.close = "c";
  m.volume = "v";
  m.net_buy_foreign = "f";
  m.net_buy_institutional = "i";
  m.net_buy_individual = "p";
  m.market_cap = "mc";
  EXPECT_EQ(panel::ingest_csv_text(csv, m).panel.size(), 1u);
}

TEST(Ingest, MissingFileIsReported) {
  EXPECT_EQ(error_kind([] { (void)panel::ingest_csv("/nonexistent/panel.csv"); }), "FileNotFound");
}

TEST(Ingest, WriterRoundTripsToEqualPanel) {
  std::vector<panel::PanelRecord> recs = run_of("BBB", Date{std::chrono::year{2021} / 3 / 1}, 7);
  auto more = run_of("AAA", Date{std::chrono::year{2021} / 3 / 3}, 4, 7.123456789012345e10);
  recs.insert(recs.end(), more.begin(), more.end());
  recs[2].net_buy_foreign = 0.1 + 0.2;  // awkward binary value
  const auto p = panel::Panel::from_records(recs);
  const auto back = panel::ingest_csv_text(panel::to_csv(p));
  EXPECT_EQ(back.rejected, 0u);
  EXPECT_EQ(back.panel, p);
}

TEST(Panel, CalendarAndUniverseAreSortedUnique) {
  auto recs = run_of("ZZZ", Date{std::chrono::year{2021} / 1 / 4}, 3);
  auto more = run_of("AAA", Date{std::chrono::year{2021} / 1 / 5}, 3);
  recs.insert(recs.end(), more.begin(), more.end());
  const auto p = panel::Panel::from_records(recs);
  ASSERT_EQ(p.universe().size(), 2u);
  EXPECT_EQ(p.universe()[0], "AAA");
  EXPECT_EQ(p.calendar().size(), 4u);
  EXPECT_TRUE(std::is_sorted(p.calendar().begin(), p.calendar().end()));
  EXPECT_EQ(p.history("AAA").size(), 3u);
  EXPECT_TRUE(p.history("QQQ").empty());
}

TEST(Clean, SparseYearTickerIsRemoved) {
  // 19 trading days in 2020, 250 in 2021.
  auto sparse = run_of("SPARSE", Date{std::chrono::year{2020} / 12 / 1}, 19);
  auto tail = run_of("SPARSE", Date{std::chrono::year{2021} / 1 / 4}, 250);
  sparse.insert(sparse.end(), tail.begin(), tail.end());
  auto keep = run_of("KEEP", Date{std::chrono::year{2020} / 11 / 2}, 300);
  sparse.insert(sparse.end(), keep.begin(), keep.end());
  panel::CleaningLog log;
  const auto out = panel::clean(panel::Panel::from_records(sparse), {}, &log);
  ASSERT_EQ(out.universe().size(), 1u);
  EXPECT_EQ(out.universe()[0], "KEEP");
  ASSERT_EQ(log.removed_sparse_years.size(), 1u);
  EXPECT_EQ(log.removed_sparse_years[0], "SPARSE");
}

TEST(Clean, SmallMedianCapIsRemoved) {
  auto recs = run_of("SMALL", Date{std::chrono::year{2021} / 1 / 4}, 30, 40e9);
  // A few large prints do not move the median above the floor.
  for (int i = 0; i < 5; ++i) recs[static_cast<std::size_t>(i)].market_cap = 500e9;
  auto big = run_of("BIG", Date{std::chrono::year{2021} / 1 / 4}, 30, 60e9);
  recs.insert(recs.end(), big.begin(), big.end());
  panel::CleaningLog log;
  const auto out = panel::clean(panel::Panel::from_records(recs), {}, &log);
  ASSERT_EQ(out.universe().size(), 1u);
  EXPECT_EQ(out.universe()[0], "BIG");
  EXPECT_EQ(log.removed_small_cap.size(), 1u);
}

TEST(Clean, CompliantPanelIsUnchanged) {
  auto recs = run_of("AAA", Date{std::chrono::year{2021} / 1 / 4}, 40);
  auto more = run_of("BBB", Date{std::chrono::year{2021} / 1 / 4}, 40);
  recs.insert(recs.end(), more.begin(), more.end());
  const auto p = panel::Panel::from_records(recs);
  EXPECT_EQ(panel::clean(p, {}), p);
}

TEST(Clean, MissingMidRangeDateIsForwardFilled) {
  // Hand fixture: AAA trades Mon, Tue, Thu, Fri; BBB also trades Wed.
  std::vector<panel::PanelRecord> recs = {
      record("AAA", "2021-01-04", 100, 1e11, 5, 6, -11, 10),
      record("AAA", "2021-01-05", 102, 1.02e11, 1, 2, -3, 20),
      record("AAA", "2021-01-07", 101, 1.01e11, 7, 8, -15, 30),
      record("AAA", "2021-01-08", 99, 0.99e11, 0, 1, -1, 40),
  };
  for (const char* d : {"2021-01-04", "2021-01-05", "2021-01-06", "2021-01-07", "2021-01-08"}) {
    recs.push_back(record("BBB", d, 50));
  }
  panel::CleaningConfig cfg;
  cfg.min_days_per_year = 1;
  panel::CleaningLog log;
  const auto out = panel::clean(panel::Panel::from_records(recs), cfg, &log);
  const auto h = out.history("AAA");
  ASSERT_EQ(h.size(), 5u);
  EXPECT_EQ(log.filled_records, 1u);
  const auto& filled = h[2];
  EXPECT_EQ(format_date(filled.date), "2021-01-06");
  EXPECT_EQ(filled.open, h[1].open);
  EXPECT_EQ(filled.high, h[1].high);
  EXPECT_EQ(filled.low, h[1].low);
  EXPECT_EQ(filled.close, 102.0);
  EXPECT_EQ(filled.market_cap, 1.02e11);
  EXPECT_EQ(filled.volume, 0);
  EXPECT_EQ(filled.net_buy_foreign, 0.0);
  EXPECT_EQ(filled.net_buy_institutional, 0.0);
  EXPECT_EQ(filled.net_buy_individual, 0.0);
  EXPECT_FALSE(filled.is_trading_day());
  EXPECT_EQ(h[3], recs[2]);
}

TEST(Clean, IsIdempotent) {
  std::vector<panel::PanelRecord> recs;
  for (int k = 0; k < 4; ++k) {
    auto run = run_of("T" + std::to_string(k), Date{std::chrono::year{2020} / 12 / 1}, 60, 4e10 + 1e10 * k);
    // punch holes
    for (std::size_t i = 0; i < run.size(); ++i) {
      if ((i + static_cast<std::size_t>(k)) % 7 != 3) recs.push_back(run[i]);
    }
  }
  const panel::CleaningConfig cfg;
  const auto once = panel::clean(panel::Panel::from_records(recs), cfg);
  const auto twice = panel::clean(once, cfg);
  EXPECT_EQ(once, twice);
}

TEST(Clean, EverythingRemovedIsAnError) {
  const auto recs = run_of("TINY", Date{std::chrono::year{2021} / 1 / 4}, 30, 1e9);
  EXPECT_EQ(error_kind([&] { (void)panel::clean(panel::Panel::from_records(recs), {}); }), "EmptyAfterCleaning");
}

TEST(Clean, RejectsNonPositiveConfig) {
  panel::CleaningConfig cfg;
  cfg.winsorize_sigma = 0.0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(Aggregate, SingleStockEqualsItsOwnSeries) {
  const auto recs = run_of("ONE", Date{std::chrono::year{2021} / 1 / 4}, 12);
  const auto p = panel::Panel::from_records(recs);
  const auto fm = panel::aggregate_market_flows(p, {panel::FlowNormalizer::MatchedFilter});
  ASSERT_EQ(fm.rows(), recs.size());
  for (std::size_t t = 0; t < recs.size(); ++t) {
    EXPECT_EQ(fm.values(static_cast<Eigen::Index>(t), 0), recs[t].net_buy_foreign / recs[t].market_cap);
    EXPECT_EQ(fm.values(static_cast<Eigen::Index>(t), 2), recs[t].net_buy_individual / recs[t].market_cap);
  }
}

TEST(Aggregate, OpposingFlowsCancel) {
  const double a = 3.5e8;
  const std::vector<panel::PanelRecord> recs = {record("A", "2021-01-04", 10, 1e11, a, 0, 0),
                                                record("B", "2021-01-04", 10, 1e11, -a, 0, 0)};
  const auto fm = panel::aggregate_market_flows(panel::Panel::from_records(recs), {panel::FlowNormalizer::MatchedFilter});
  ASSERT_EQ(fm.rows(), 1u);
  EXPECT_EQ(fm.values(0, 0), 0.0);
}

TEST(Aggregate, ThreeStockFourDateHandValues) {
  // Matched flows chosen as exact binary fractions of cap 1e10 so the hand
  // averages are exact.
  const double cap = 1e10;
  const double f[3][4] = {{1, 2, 3, 4}, {-1, 0, 5, 2}, {3, -2, 1, 0}};
  const char* dates[4] = {"2021-01-04", "2021-01-05", "2021-01-06", "2021-01-07"};
  std::vector<panel::PanelRecord> recs;
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < 4; ++t) {
      recs.push_back(record(std::string(1, static_cast<char>('A' + s)), dates[t], 10, cap, f[s][t] * cap * 0.25,
                            -f[s][t] * cap * 0.5, 0.0));
    }
  }
  const auto fm = panel::aggregate_market_flows(panel::Panel::from_records(recs), {panel::FlowNormalizer::MatchedFilter});
  ASSERT_EQ(fm.rows(), 4u);
  ASSERT_EQ(fm.values.cols(), 3);
  const double expect_foreign[4] = {0.25, 0.0, 0.75, 0.5};  // (sum of column) * 0.25 / 3
  const double expect_inst[4] = {-0.5, 0.0, -1.5, -1.0};
  for (int t = 0; t < 4; ++t) {
    EXPECT_NEAR(fm.values(t, 0), expect_foreign[t], 1e-15);
    EXPECT_NEAR(fm.values(t, 1), expect_inst[t], 1e-15);
    EXPECT_EQ(fm.values(t, 2), 0.0);
  }
}

TEST(Aggregate, OneRowPerCalendarDateAndThreeColumns) {
  auto recs = run_of("AAA", Date{std::chrono::year{2021} / 1 / 4}, 20);
  auto more = run_of("BBB", Date{std::chrono::year{2021} / 1 / 11}, 20);
  recs.insert(recs.end(), more.begin(), more.end());
  const auto p = panel::Panel::from_records(recs);
  for (auto method : {panel::FlowNormalizer::Raw, panel::FlowNormalizer::MatchedFilter}) {
    const auto fm = panel::aggregate_market_flows(p, {method});
    EXPECT_EQ(fm.rows(), p.calendar().size());
    EXPECT_EQ(fm.values.cols(), 3);
    EXPECT_EQ(fm.dates, p.calendar());
  }
}

TEST(Aggregate, ZscoreDropsWarmupDates) {
  const auto recs = run_of("AAA", Date{std::chrono::year{2021} / 1 / 4}, 30);
  panel::NormalizerSpec spec{panel::FlowNormalizer::ZScore, 5, 0.0};
  const auto fm = panel::aggregate_market_flows(panel::Panel::from_records(recs), spec);
  EXPECT_EQ(fm.rows(), 25u);
}

TEST(Flows, MatrixAndNormalizedFilesRoundTrip) {
  auto recs = run_of("AAA", Date{std::chrono::year{2021} / 1 / 4}, 10);
  auto more = run_of("BBB", Date{std::chrono::year{2021} / 1 / 4}, 10, 3.3e11);
  recs.insert(recs.end(), more.begin(), more.end());
  const auto p = panel::Panel::from_records(recs);
  const auto dir = std::filesystem::temp_directory_path() / "flowlab_test_panel";
  const auto normalized = panel::normalize_panel(p, {panel::FlowNormalizer::MatchedFilter});
  panel::write_normalized(normalized, dir / "normalized.csv");
  const auto back = panel::read_normalized(dir / "normalized.csv");
  ASSERT_EQ(back.rows.size(), normalized.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].ticker, normalized.rows[i].ticker);
    EXPECT_EQ(back.rows[i].date, normalized.rows[i].date);
    EXPECT_EQ(back.rows[i].values, normalized.rows[i].values);
  }
  const auto fm = panel::aggregate(normalized);
  panel::write_flow_matrix(fm, dir / "flows.csv");
  const auto fm2 = panel::read_flow_matrix(dir / "flows.csv");
  EXPECT_EQ(fm2.dates, fm.dates);
  EXPECT_EQ(fm2.values, fm.values);
  std::filesystem::remove_all(dir);
}

TEST(Flows, NormalizerNamesParse) {
  EXPECT_EQ(panel::parse_normalizer("matched"), panel::FlowNormalizer::MatchedFilter);
  EXPECT_EQ(panel::parse_normalizer("matched_filter"), panel::FlowNormalizer::MatchedFilter);
  EXPECT_EQ(panel::parse_normalizer("zscore"), panel::FlowNormalizer::ZScore);
  EXPECT_EQ(panel::parse_normalizer("raw"), panel::FlowNormalizer::Raw);
  EXPECT_FALSE(panel::parse_normalizer("volume").has_value());
}
