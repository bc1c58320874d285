#include "flowlab/filters.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/stats.hpp"

namespace flowlab::filters {

double matched_filter(double net_buy, double market_cap) {
  if (!(market_cap > 0.0)) {
    throw Error("filters", "NonpositiveMarketCap", fmt::format("market_cap = {}", market_cap));
  }
  return net_buy / market_cap;
}

std::vector<std::optional<double>> zscore_normalize(std::span<const double> series, int window) {
  if (window < 2) throw Error("filters", "WindowTooShort", fmt::format("window = {}", window));
  const auto w = static_cast<std::size_t>(window);
  std::vector<std::optional<double>> out(series.size());
  for (std::size_t t = w; t < series.size(); ++t) {
    const auto past = series.subspan(t - w, w);
    const double sd = stats::sample_sd(past);
    if (!(sd > 0.0)) continue;
    out[t] = (series[t] - stats::mean(past)) / sd;
  }
  return out;
}

Moments moments(std::span<const double> series) {
  return {stats::mean(series), stats::sample_sd(series)};
}

std::vector<double> winsorize(std::span<const double> series, double sigma) {
  if (series.size() < 2) throw PreconditionError("filters", "winsorize needs at least two values");
  const auto m = moments(series);
  if (!(m.sd > 0.0)) throw Error("filters", "DegenerateSeries", "zero standard deviation");
  return winsorize(series, sigma, m);
}

std::vector<double> winsorize(std::span<const double> series, double sigma, const Moments& m) {
  if (!(sigma > 0.0)) throw PreconditionError("filters", "winsorize sigma must be positive");
  const double lo = m.mean - sigma * m.sd;
  const double hi = m.mean + sigma * m.sd;
  std::vector<double> out(series.begin(), series.end());
  for (auto& v : out) v = std::clamp(v, lo, hi);
  return out;
}

}  // namespace flowlab::filters
