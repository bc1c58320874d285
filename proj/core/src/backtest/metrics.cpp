#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "flowlab/backtest.hpp"
#include "flowlab/error.hpp"
#include "flowlab/stats.hpp"

namespace flowlab::backtest {

double Metrics::sharpe_or_throw() const {
  if (!sharpe) throw Error("backtest", "ZeroVolatility", fmt::format("sd = 0 over {} observations", n));
  return *sharpe;
}

Metrics metrics(std::span<const double> daily_returns) {
  if (daily_returns.size() < 2) {
    throw PreconditionError("backtest", fmt::format("metrics need >= 2 observations, got {}", daily_returns.size()));
  }
  Metrics m;
  m.n = daily_returns.size();
  m.mean = stats::mean(daily_returns);
  // A constant series has sd exactly zero; the two-pass formula can leave rounding residue.
  const auto [lo, hi] = std::minmax_element(daily_returns.begin(), daily_returns.end());
  m.sd = *lo == *hi ? 0.0 : stats::sample_sd(daily_returns);
  if (m.sd > 0.0) m.sharpe = m.mean / m.sd * std::sqrt(kTradingDays);

  double equity = 1.0;
  double peak = 1.0;
  std::size_t wins = 0;
  for (double r : daily_returns) {
    equity *= 1.0 + r;
    peak = std::max(peak, equity);
    m.max_drawdown = std::min(m.max_drawdown, equity / peak - 1.0);
    if (r > 0.0) ++wins;
  }
  m.cumulative_return = equity - 1.0;
  m.annualized_return = std::pow(equity, kTradingDays / static_cast<double>(m.n)) - 1.0;
  if (m.max_drawdown < 0.0) m.calmar = m.annualized_return / std::abs(m.max_drawdown);
  m.hit_rate = static_cast<double>(wins) / static_cast<double>(m.n);
  return m;
}

}  // namespace flowlab::backtest
