#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowlab/date.hpp"
#include "flowlab/flows.hpp"
#include "flowlab/ica.hpp"
#include "flowlab/panel.hpp"

namespace flowlab::backtest {

inline constexpr double kTradingDays = 252.0;

enum class StrategyKind { SimpleMomentum, IcaFactor };

[[nodiscard]] std::string_view strategy_name(StrategyKind k);
/// Accepts "momentum", "simple_momentum", "ica", "ica_factor".
[[nodiscard]] std::optional<StrategyKind> parse_strategy(std::string_view name);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::SimpleMomentum;
  /// Fraction of the cross-section in each leg.
  double decile = 0.1;
  /// Charged per unit of one-sided turnover (10 bp round trip).
  double cost_roundtrip = 0.001;
  int signal_lag = 1;

  void validate() const;
};

/// Sharpe, drawdown and related statistics of a daily return series.
struct Metrics {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  /// mean / sd * sqrt(252); absent when sd = 0.
  std::optional<double> sharpe;
  double cumulative_return = 0.0;
  /// (1 + cumulative)^(252 / n) - 1.
  double annualized_return = 0.0;
  /// min over t of equity_t / running peak - 1, equity starting at 1.
  double max_drawdown = 0.0;
  /// annualized_return / |max_drawdown|; absent without a drawdown.
  std::optional<double> calmar;
  /// Fraction of strictly positive days.
  double hit_rate = 0.0;

  /// Throws Error("backtest", "ZeroVolatility") when the Sharpe ratio is undefined.
  [[nodiscard]] double sharpe_or_throw() const;
};

/// Requires at least two observations.
[[nodiscard]] Metrics metrics(std::span<const double> daily_returns);

struct Signal {
  std::string ticker;
  Date date{};
  double value = 0.0;
};

/// The per-stock signal of each normalized row (mean over groups).
[[nodiscard]] std::vector<Signal> signals_from(const panel::NormalizedFlows& flows);

struct DayRecord {
  /// Date the position was formed (signal date).
  Date signal_date{};
  /// Date over which the position was held and the return realized.
  Date date{};
  double gross = 0.0;
  double turnover = 0.0;
  double net = 0.0;
  /// Momentum legs in ticker order; empty for the timing strategy.
  std::vector<std::string> long_leg;
  std::vector<std::string> short_leg;
  double long_weight = 0.0;
  double short_weight = 0.0;
  /// Market-timing position in {-1, 0, +1}; zero for momentum.
  double position = 0.0;
};

struct SkippedDate {
  Date date{};
  std::size_t available = 0;
  std::string reason;
};

struct BacktestReport {
  std::string strategy;
  StrategyConfig config;
  std::vector<DayRecord> days;
  std::vector<SkippedDate> skipped;
  Metrics net;
  /// Strategy-day hit rate on gross returns.
  double hit_rate = 0.0;
  double mean_turnover = 0.0;

  [[nodiscard]] std::vector<double> net_returns() const;
  [[nodiscard]] std::vector<double> gross_returns() const;
  [[nodiscard]] std::vector<Date> dates() const;
};

/// Daily decile long-short on the signal known at the close of t, held over
/// the next calendar date. Legs are equal-weighted at +1 and -1, ranking
/// ties are broken by ticker, and dates with fewer than ceil(1 / decile)
/// eligible stocks are skipped (Error kind TooFewStocks in the skip log).
[[nodiscard]] BacktestReport run_momentum(const panel::Panel& market, std::span<const Signal> signals,
                                          const StrategyConfig& cfg);
[[nodiscard]] BacktestReport run_momentum(const panel::Panel& market,
                                          const panel::NormalizedFlows& flows,
                                          const StrategyConfig& cfg);

/// Equal-weighted market return from each calendar date to the next, over
/// stocks with records on both dates.
struct MarketReturn {
  Date from{};
  Date to{};
  double value = 0.0;
  std::size_t stocks = 0;
};
[[nodiscard]] std::vector<MarketReturn> market_returns(const panel::Panel& market);

/// Market timing: position sign(signal_t) in the equal-weighted market over
/// the next date; costs on position changes.
[[nodiscard]] BacktestReport run_timing(const panel::Panel& market, const std::vector<Date>& dates,
                                        std::span<const double> signal, const StrategyConfig& cfg);

/// run_timing on the first independent component.
[[nodiscard]] BacktestReport run_ica_factor(const panel::FlowMatrix& flows, const panel::Panel& market,
                                            const ica::IcaResult& ica, const StrategyConfig& cfg);

struct BootstrapOptions {
  std::size_t block_length = 21;
  std::size_t replications = 1000;
  std::uint64_t seed = 0;
  double level = 0.95;
};

struct BootstrapCI {
  std::string statistic;
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t block_length = 0;
  std::size_t replications = 0;
  std::uint64_t seed = 0;
};

/// Statistic evaluated on a resampled index sequence of the original series.
using IndexedStatistic = std::function<double(std::span<const std::size_t>)>;

/// Circular block bootstrap: each replication draws ceil(T / L) blocks with
/// uniform start and wraparound, truncated to T indices. Replication r uses
/// seed derive_seed(seed, r). The interval is the type-7 percentile range.
/// Non-finite replicate values are dropped. Throws
/// Error("backtest", "SeriesTooShort") when T < 2 L.
[[nodiscard]] BootstrapCI block_bootstrap_ci(std::string name, std::size_t length,
                                             const IndexedStatistic& statistic,
                                             const BootstrapOptions& options = {});

[[nodiscard]] BootstrapCI bootstrap_mean(std::span<const double> series,
                                         const BootstrapOptions& options = {});
/// Annualized Sharpe ratio.
[[nodiscard]] BootstrapCI bootstrap_sharpe(std::span<const double> series,
                                           const BootstrapOptions& options = {});
/// Pearson correlation of paired series resampled jointly.
[[nodiscard]] BootstrapCI bootstrap_correlation(std::span<const double> x, std::span<const double> y,
                                                const BootstrapOptions& options = {});

}  // namespace flowlab::backtest
