#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "flowlab/date.hpp"
#include "flowlab/filters.hpp"
#include "flowlab/panel.hpp"

namespace flowlab::panel {

enum class FlowNormalizer { Raw, MatchedFilter, ZScore };

[[nodiscard]] std::string_view normalizer_name(FlowNormalizer n);
/// Accepts "raw", "matched", "matched_filter", "zscore".
[[nodiscard]] std::optional<FlowNormalizer> parse_normalizer(std::string_view name);

struct NormalizerSpec {
  FlowNormalizer method = FlowNormalizer::MatchedFilter;
  int zscore_window = filters::kDefaultZscoreWindow;
  /// Per (ticker, group) winsorization after normalization; 0 disables it.
  double winsorize_sigma = 0.0;
};

/// Normalized flows of one stock on one date, indexed by InvestorGroup.
struct StockFlow {
  std::string ticker;
  Date date{};
  std::array<double, 3> values{};

  /// Equal-weighted mean over the three groups: the per-stock trading signal.
  [[nodiscard]] double signal() const { return (values[0] + values[1] + values[2]) / 3.0; }
};

/// Per-stock normalized flows sorted by (ticker, date). Stock-days without a
/// defined value (z-score warm-up) are absent.
struct NormalizedFlows {
  FlowNormalizer method = FlowNormalizer::MatchedFilter;
  std::vector<StockFlow> rows;
};

[[nodiscard]] NormalizedFlows normalize_panel(const Panel& panel, const NormalizerSpec& spec);

/// Date-indexed T x 3 matrix of market-aggregated flows, columns ordered
/// foreign, institutional, individual.
struct FlowMatrix {
  std::vector<Date> dates;
  Eigen::MatrixXd values;

  [[nodiscard]] std::size_t rows() const { return dates.size(); }
};

/// Equal-weighted cross-sectional mean of normalized flows, one row per
/// date on which at least one stock has a defined value.
[[nodiscard]] FlowMatrix aggregate(const NormalizedFlows& flows);

/// Normalizes each stock's flows then averages across the stocks present each
/// date.
[[nodiscard]] FlowMatrix aggregate_market_flows(const Panel& panel, const NormalizerSpec& spec);

void write_flow_matrix(const FlowMatrix& flows, const std::filesystem::path& path);
[[nodiscard]] FlowMatrix read_flow_matrix(const std::filesystem::path& path);

/// CSV columns: ticker,date,foreign,inst,indiv,signal.
void write_normalized(const NormalizedFlows& flows, const std::filesystem::path& path);
[[nodiscard]] NormalizedFlows read_normalized(const std::filesystem::path& path);

}  // namespace flowlab::panel
