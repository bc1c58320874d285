#include <cmath>

#include <fmt/format.h>

#include "flowlab/backtest.hpp"
#include "flowlab/error.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/stats.hpp"

namespace flowlab::backtest {

BootstrapCI block_bootstrap_ci(std::string name, std::size_t length, const IndexedStatistic& statistic,
                               const BootstrapOptions& options) {
  const std::size_t L = options.block_length;
  if (L < 1 || options.replications < 2 || !(options.level > 0.0 && options.level < 1.0)) {
    throw PreconditionError("backtest", "bootstrap needs block_length >= 1, >= 2 replications, level in (0, 1)");
  }
  if (length < 2 * L) {
    throw Error("backtest", "SeriesTooShort", fmt::format("T = {} < 2 x block length {}", length, L));
  }
  std::vector<std::size_t> identity(length);
  for (std::size_t t = 0; t < length; ++t) identity[t] = t;

  BootstrapCI ci;
  ci.statistic = std::move(name);
  ci.point = statistic(identity);
  ci.block_length = L;
  ci.replications = options.replications;
  ci.seed = options.seed;

  const std::size_t blocks = (length + L - 1) / L;
  std::vector<std::size_t> idx(length);
  std::vector<double> values;
  values.reserve(options.replications);
  for (std::size_t r = 0; r < options.replications; ++r) {
    Rng rng(derive_seed(options.seed, r));
    std::size_t k = 0;
    for (std::size_t b = 0; b < blocks && k < length; ++b) {
      const auto start = static_cast<std::size_t>(rng.below(length));
      for (std::size_t j = 0; j < L && k < length; ++j) idx[k++] = (start + j) % length;
    }
    const double v = statistic(idx);
    if (std::isfinite(v)) values.push_back(v);
  }
  if (values.size() < 2) {
    throw PreconditionError("backtest", fmt::format("statistic '{}' is undefined on the resamples", ci.statistic));
  }
  const double tail = (1.0 - options.level) / 2.0;
  ci.lower = stats::quantile(values, tail);
  ci.upper = stats::quantile(values, 1.0 - tail);
  return ci;
}

BootstrapCI bootstrap_mean(std::span<const double> series, const BootstrapOptions& options) {
  return block_bootstrap_ci("mean", series.size(), [&](std::span<const std::size_t> idx) {
    double s = 0.0;
    for (auto i : idx) s += series[i];
    return s / static_cast<double>(idx.size());
  }, options);
}

BootstrapCI bootstrap_sharpe(std::span<const double> series, const BootstrapOptions& options) {
  std::vector<double> buf(series.size());
  return block_bootstrap_ci("sharpe", series.size(), [&](std::span<const std::size_t> idx) {
    for (std::size_t k = 0; k < idx.size(); ++k) buf[k] = series[idx[k]];
    const double sd = stats::sample_sd(buf);
    return sd > 0.0 ? stats::mean(buf) / sd * std::sqrt(kTradingDays) : std::nan("");
  }, options);
}

BootstrapCI bootstrap_correlation(std::span<const double> x, std::span<const double> y,
                                  const BootstrapOptions& options) {
  if (x.size() != y.size()) throw PreconditionError("backtest", "paired series differ in length");
  std::vector<double> bx(x.size()), by(y.size());
  return block_bootstrap_ci("correlation", x.size(), [&](std::span<const std::size_t> idx) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      bx[k] = x[idx[k]];
      by[k] = y[idx[k]];
    }
    return stats::pearson(bx, by).value_or(std::nan(""));
  }, options);
}

}  // namespace flowlab::backtest
