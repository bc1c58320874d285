#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowlab/date.hpp"

namespace flowlab {

/// The three investor categories disclosed by the exchange.
enum class InvestorGroup { Foreign = 0, Institutional = 1, Individual = 2 };

inline constexpr std::array<InvestorGroup, 3> kInvestorGroups{
    InvestorGroup::Foreign, InvestorGroup::Institutional, InvestorGroup::Individual};

/// Short column-style name: "foreign", "inst", "indiv".
[[nodiscard]] std::string_view group_name(InvestorGroup g);
[[nodiscard]] std::optional<InvestorGroup> parse_group(std::string_view name);

}  // namespace flowlab

namespace flowlab::panel {

/// One stock-day. Prices and market cap in KRW, net buys signed KRW.
struct PanelRecord {
  std::string ticker;
  Date date{};
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  std::int64_t volume = 0;
  double net_buy_foreign = 0.0;
  double net_buy_institutional = 0.0;
  double net_buy_individual = 0.0;
  double market_cap = 0.0;

  [[nodiscard]] double net_buy(InvestorGroup g) const;
  /// False for forward-filled placeholders: zero volume and zero flow.
  [[nodiscard]] bool is_trading_day() const;

  friend bool operator==(const PanelRecord&, const PanelRecord&) = default;
};

/// Describes why a record breaks the stock-day invariants, or nullopt when valid.
[[nodiscard]] std::optional<std::string> record_violation(const PanelRecord& r);

/// Immutable stock-day panel. Records are stored sorted by (ticker, date) so
/// each ticker's history is one contiguous run.
class Panel {
 public:
  Panel() = default;

  /// Throws Error("panel", "DuplicateKey") when a (ticker, date) pair repeats.
  static Panel from_records(std::vector<PanelRecord> records);

  [[nodiscard]] std::span<const PanelRecord> records() const { return records_; }
  [[nodiscard]] const std::vector<Date>& calendar() const { return calendar_; }
  [[nodiscard]] const std::vector<std::string>& universe() const { return universe_; }
  [[nodiscard]] std::size_t size() const { return records_.size(); }
  [[nodiscard]] bool empty() const { return records_.empty(); }

  /// Chronological history of one ticker; empty span for unknown tickers.
  [[nodiscard]] std::span<const PanelRecord> history(std::string_view ticker) const;
  /// Chronological history of the i-th ticker in `universe()`.
  [[nodiscard]] std::span<const PanelRecord> history(std::size_t ticker_index) const;

  friend bool operator==(const Panel& a, const Panel& b) { return a.records_ == b.records_; }

 private:
  std::vector<PanelRecord> records_;
  std::vector<Date> calendar_;
  std::vector<std::string> universe_;
  std::vector<std::size_t> offsets_;  // universe_.size() + 1 run boundaries
};

/// Maps each logical field to the column name used in the source file.
struct ColumnMapping {
  std::string ticker = "ticker";
  std::string date = "date";
  std::string open = "open";
  std::string high = "high";
  std::string low = "low";
  std::string close = "close";
  std::string volume = "volume";
  std::string net_buy_foreign = "net_buy_foreign";
  std::string net_buy_institutional = "net_buy_inst";
  std::string net_buy_individual = "net_buy_indiv";
  std::string market_cap = "market_cap";
};

struct IngestResult {
  Panel panel;
  std::size_t rejected = 0;
  /// Source line number and reason for every rejected row.
  std::vector<std::pair<std::size_t, std::string>> rejections;
};

/// Reads a stock-day CSV. Rows that parse but break a record invariant are
/// rejected and counted. Errors: MissingColumn, DuplicateKey, UnparseableRow.
[[nodiscard]] IngestResult ingest_csv(const std::filesystem::path& path,
                                      const ColumnMapping& schema = {});
[[nodiscard]] IngestResult ingest_csv_text(std::string_view text,
                                           const ColumnMapping& schema = {});

/// Canonical CSV with the default column names and round-trip precision.
[[nodiscard]] std::string to_csv(const Panel& panel);
void write_csv(const Panel& panel, const std::filesystem::path& path);

struct CleaningConfig {
  int min_days_per_year = 20;
  double winsorize_sigma = 5.0;
  double min_market_cap = 50e9;
  bool forward_fill = true;

  /// Throws PreconditionError unless every numeric field is positive.
  void validate() const;
};

struct CleaningLog {
  std::vector<std::string> removed_sparse_years;
  std::vector<std::string> removed_small_cap;
  std::size_t filled_records = 0;
};

/// Applies the exclusion and gap-filling rules:
///  - drop tickers with fewer than `min_days_per_year` trading days in any
///    calendar year in which they trade;
///  - drop tickers whose median market cap over their trading days is below
///    `min_market_cap`;
///  - insert a record for every calendar date missing inside a surviving
///    ticker's first..last span, copying the previous record's prices and
///    market cap with zero volume and zero net buys.
/// Forward-filled records are not trading days, which makes clean idempotent.
/// Throws Error("panel", "EmptyAfterCleaning") when nothing survives.
[[nodiscard]] Panel clean(const Panel& panel, const CleaningConfig& cfg,
                          CleaningLog* log = nullptr);

}  // namespace flowlab::panel
