#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "flowlab/backtest.hpp"
#include "flowlab/error.hpp"

namespace flowlab::backtest {

std::string_view strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::SimpleMomentum:
      return "momentum";
    case StrategyKind::IcaFactor:
      return "ica";
  }
  return "unknown";
}

std::optional<StrategyKind> parse_strategy(std::string_view name) {
  if (name == "momentum" || name == "simple_momentum") return StrategyKind::SimpleMomentum;
  if (name == "ica" || name == "ica_factor") return StrategyKind::IcaFactor;
  return std::nullopt;
}

void StrategyConfig::validate() const {
  if (!(decile > 0.0 && decile <= 0.5)) {
    throw PreconditionError("backtest", fmt::format("decile must lie in (0, 0.5], got {}", decile));
  }
  if (!(cost_roundtrip >= 0.0)) throw PreconditionError("backtest", "cost must be >= 0");
  if (signal_lag < 1) throw PreconditionError("backtest", "signal_lag must be >= 1");
}

std::vector<double> BacktestReport::net_returns() const {
  std::vector<double> out;
  out.reserve(days.size());
  for (const auto& d : days) out.push_back(d.net);
  return out;
}

std::vector<double> BacktestReport::gross_returns() const {
  std::vector<double> out;
  out.reserve(days.size());
  for (const auto& d : days) out.push_back(d.gross);
  return out;
}

std::vector<Date> BacktestReport::dates() const {
  std::vector<Date> out;
  out.reserve(days.size());
  for (const auto& d : days) out.push_back(d.date);
  return out;
}

std::vector<Signal> signals_from(const panel::NormalizedFlows& flows) {
  std::vector<Signal> out;
  out.reserve(flows.rows.size());
  for (const auto& row : flows.rows) out.push_back({row.ticker, row.date, row.signal()});
  return out;
}

namespace {

void finish(BacktestReport& report) {
  if (report.days.size() < 2) {
    throw Error("backtest", "TooFewStocks",
                fmt::format("only {} tradable dates ({} skipped)", report.days.size(), report.skipped.size()));
  }
  const auto net = report.net_returns();
  report.net = metrics(net);
  std::size_t wins = 0;
  double turnover = 0.0;
  for (const auto& d : report.days) {
    if (d.gross > 0.0) ++wins;
    turnover += d.turnover;
  }
  report.hit_rate = static_cast<double>(wins) / static_cast<double>(report.days.size());
  report.mean_turnover = turnover / static_cast<double>(report.days.size());
}

struct Candidate {
  const std::string* ticker;
  double signal;
  double ret;
};

double leg_sum(std::vector<const Candidate*> leg) {
  std::sort(leg.begin(), leg.end(), [](const Candidate* a, const Candidate* b) { return *a->ticker < *b->ticker; });
  double s = 0.0;
  for (const auto* c : leg) s += c->ret;
  return s;
}

}  // namespace

BacktestReport run_momentum(const panel::Panel& market, std::span<const Signal> signals,
                            const StrategyConfig& cfg) {
  cfg.validate();
  std::map<std::string, std::map<Date, double>, std::less<>> by_ticker;
  for (const auto& s : signals) by_ticker[s.ticker][s.date] = s.value;

  const auto& calendar = market.calendar();
  const auto min_stocks = static_cast<std::size_t>(std::ceil(1.0 / cfg.decile - 1e-9));
  const auto lag = static_cast<std::size_t>(cfg.signal_lag - 1);

  // Per ticker: close by calendar index (NaN where absent).
  const auto& universe = market.universe();
  std::vector<std::vector<double>> closes(universe.size(), std::vector<double>(calendar.size(), std::nan("")));
  for (std::size_t i = 0; i < universe.size(); ++i) {
    for (const auto& rec : market.history(i)) {
      const auto pos = std::lower_bound(calendar.begin(), calendar.end(), rec.date) - calendar.begin();
      closes[i][static_cast<std::size_t>(pos)] = rec.close;
    }
  }

  BacktestReport report;
  report.strategy = "momentum";
  report.config = cfg;
  std::map<std::string, double> held;
  for (std::size_t d = lag; d + 1 < calendar.size(); ++d) {
    const Date signal_date = calendar[d - lag];
    std::vector<Candidate> pool;
    for (std::size_t i = 0; i < universe.size(); ++i) {
      const double c0 = closes[i][d];
      const double c1 = closes[i][d + 1];
      if (!(c0 > 0.0) || std::isnan(c1)) continue;
      const auto it = by_ticker.find(universe[i]);
      if (it == by_ticker.end()) continue;
      const auto sig = it->second.find(signal_date);
      if (sig == it->second.end() || !std::isfinite(sig->second)) continue;
      pool.push_back({&universe[i], sig->second, c1 / c0 - 1.0});
    }
    if (pool.size() < min_stocks) {
      report.skipped.push_back({signal_date, pool.size(), "TooFewStocks"});
      continue;
    }
    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
      if (a.signal != b.signal) return a.signal > b.signal;
      return *a.ticker < *b.ticker;
    });
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(cfg.decile * static_cast<double>(pool.size()) + 1e-9)));
    std::vector<const Candidate*> longs, shorts;
    for (std::size_t j = 0; j < k; ++j) {
      longs.push_back(&pool[j]);
      shorts.push_back(&pool[pool.size() - 1 - j]);
    }
    const double w = 1.0 / static_cast<double>(k);

    DayRecord day;
    day.signal_date = signal_date;
    day.date = calendar[d + 1];
    day.gross = leg_sum(longs) / static_cast<double>(k) - leg_sum(shorts) / static_cast<double>(k);

    std::map<std::string, double> target;
    for (const auto* c : longs) target[*c->ticker] = w;
    for (const auto* c : shorts) target[*c->ticker] = -w;
    double change = 0.0;
    for (const auto& [ticker, weight] : target) {
      const auto it = held.find(ticker);
      change += std::abs(weight - (it == held.end() ? 0.0 : it->second));
    }
    for (const auto& [ticker, weight] : held) {
      if (!target.contains(ticker)) change += std::abs(weight);
    }
    day.turnover = 0.5 * change;
    day.net = day.gross - cfg.cost_roundtrip * day.turnover;
    for (const auto& [ticker, weight] : target) {
      if (weight > 0.0) {
        day.long_leg.push_back(ticker);
        day.long_weight += weight;
      } else {
        day.short_leg.push_back(ticker);
        day.short_weight += weight;
      }
    }
    held = std::move(target);
    report.days.push_back(std::move(day));
  }
  finish(report);
  return report;
}

BacktestReport run_momentum(const panel::Panel& market, const panel::NormalizedFlows& flows,
                            const StrategyConfig& cfg) {
  const auto signals = signals_from(flows);
  return run_momentum(market, signals, cfg);
}

std::vector<MarketReturn> market_returns(const panel::Panel& market) {
  const auto& calendar = market.calendar();
  std::vector<double> sum(calendar.size(), 0.0);
  std::vector<std::size_t> count(calendar.size(), 0);
  for (std::size_t i = 0; i < market.universe().size(); ++i) {
    const auto h = market.history(i);
    for (std::size_t t = 0; t + 1 < h.size(); ++t) {
      const auto pos = static_cast<std::size_t>(std::lower_bound(calendar.begin(), calendar.end(), h[t].date) -
                                                calendar.begin());
      if (pos + 1 >= calendar.size() || h[t + 1].date != calendar[pos + 1] || !(h[t].close > 0.0)) continue;
      sum[pos] += h[t + 1].close / h[t].close - 1.0;
      ++count[pos];
    }
  }
  std::vector<MarketReturn> out;
  for (std::size_t d = 0; d + 1 < calendar.size(); ++d) {
    if (count[d] == 0) continue;
    out.push_back({calendar[d], calendar[d + 1], sum[d] / static_cast<double>(count[d]), count[d]});
  }
  return out;
}

BacktestReport run_timing(const panel::Panel& market, const std::vector<Date>& dates,
                          std::span<const double> signal, const StrategyConfig& cfg) {
  cfg.validate();
  if (dates.size() != signal.size()) throw PreconditionError("backtest", "signal and dates differ in length");
  std::map<Date, MarketReturn> by_date;
  for (const auto& m : market_returns(market)) by_date.emplace(m.from, m);
  const auto lag = static_cast<std::size_t>(cfg.signal_lag - 1);

  BacktestReport report;
  report.strategy = "ica";
  report.config = cfg;
  double held = 0.0;
  for (std::size_t i = lag; i < dates.size(); ++i) {
    const auto it = by_date.find(dates[i]);
    if (it == by_date.end()) {
      report.skipped.push_back({dates[i], 0, "NoMarketReturn"});
      continue;
    }
    const double s = signal[i - lag];
    const double position = static_cast<double>((s > 0.0) - (s < 0.0));
    DayRecord day;
    day.signal_date = dates[i - lag];
    day.date = it->second.to;
    day.position = position;
    day.gross = position * it->second.value;
    day.turnover = 0.5 * std::abs(position - held);
    day.net = day.gross - cfg.cost_roundtrip * day.turnover;
    held = position;
    report.days.push_back(std::move(day));
  }
  finish(report);
  return report;
}

BacktestReport run_ica_factor(const panel::FlowMatrix& flows, const panel::Panel& market,
                              const ica::IcaResult& ica, const StrategyConfig& cfg) {
  if (static_cast<std::size_t>(ica.components.rows()) != flows.rows() || ica.components.cols() != 3) {
    throw PreconditionError("backtest", "IC series must align with the flow dates");
  }
  const Eigen::VectorXd ic1 = ica.components.col(0);
  return run_timing(market, flows.dates, std::span<const double>(ic1.data(), static_cast<std::size_t>(ic1.size())),
                    cfg);
}

}  // namespace flowlab::backtest
