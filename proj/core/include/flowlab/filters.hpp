#pragma once

#include <optional>
#include <span>
#include <vector>

namespace flowlab::filters {

/// Net buying divided by market capitalization: a scale-free measure of
/// buying pressure. Throws Error("filters", "NonpositiveMarketCap").
[[nodiscard]] double matched_filter(double net_buy, double market_cap);

inline constexpr int kDefaultZscoreWindow = 60;

/// Trailing-window z-score. Entry t is (x[t] - mean) / sd over the `window`
/// values strictly before t (sample sd). Entries without a full window or
/// with zero sd are nullopt. Throws Error("filters", "WindowTooShort") for
/// window < 2.
[[nodiscard]] std::vector<std::optional<double>> zscore_normalize(std::span<const double> series,
                                                                  int window = kDefaultZscoreWindow);

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

/// Mean and sample sd of the series.
[[nodiscard]] Moments moments(std::span<const double> series);

/// Clamps values to mean +/- sigma * sd using the moments of the input
/// series, computed once before clamping. Throws DegenerateSeries for sd = 0
/// and PreconditionError for sigma <= 0 or fewer than two values.
[[nodiscard]] std::vector<double> winsorize(std::span<const double> series, double sigma);

/// Clamps to frozen moments. Idempotent for fixed `m`.
[[nodiscard]] std::vector<double> winsorize(std::span<const double> series, double sigma,
                                            const Moments& m);

}  // namespace flowlab::filters
