#pragma once

#include <optional>
#include <span>

namespace flowlab::stats {

[[nodiscard]] double mean(std::span<const double> xs);

/// Sample standard deviation (n - 1 denominator). Zero for fewer than two values.
[[nodiscard]] double sample_sd(std::span<const double> xs);

/// Pearson correlation. nullopt when either series has zero variance or the
/// lengths differ or fewer than two points are given.
[[nodiscard]] std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys);

/// Two-sided p-value of H0: rho = 0 using t = r sqrt((n-2)/(1-r^2)) with n-2
/// degrees of freedom.
[[nodiscard]] double correlation_p_value(double r, std::size_t n);

/// Linear-interpolated quantile (Hyndman-Fan type 7) of unsorted data.
[[nodiscard]] double quantile(std::span<const double> xs, double q);

/// Excess kurtosis using population moments.
[[nodiscard]] double excess_kurtosis(std::span<const double> xs);

}  // namespace flowlab::stats
