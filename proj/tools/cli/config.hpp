#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowlab/backtest.hpp"
#include "flowlab/flows.hpp"
#include "flowlab/ica.hpp"
#include "flowlab/lstm.hpp"
#include "flowlab/panel.hpp"
#include "flowlab/predict.hpp"
#include "flowlab/synth.hpp"

namespace flowlab::cli {

struct IcaSettings {
  ica::FastIcaOptions fastica;
  bool rolling = true;
  int window = 252;
  int step = 21;
};

using GroupPair = std::pair<InvestorGroup, InvestorGroup>;

struct CoherenceSettings {
  int smoothing = 15;
  std::vector<GroupPair> pairs{{InvestorGroup::Foreign, InvestorGroup::Institutional},
                               {InvestorGroup::Foreign, InvestorGroup::Individual},
                               {InvestorGroup::Institutional, InvestorGroup::Individual}};
};

struct TrainSettings {
  std::string model = "lstm";
  predict::Architecture arch;
  predict::TrainConfig train;
  std::vector<double> lambdas{1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
};

struct BacktestSettings {
  backtest::StrategyConfig strategy;
  backtest::BootstrapOptions bootstrap;
};

/// Everything a pipeline run needs, read from one sectioned key-value file.
///
///   [run]        seed, source (synth | csv), input, output, factors
///   [columns]    source column names for csv input
///   [cleaning]   min_days_per_year, winsorize_sigma, min_market_cap, forward_fill
///   [synth]      generator parameters, mixing as 9 row-major numbers
///   [normalize]  method, zscore_window, winsorize_sigma
///   [ica]        max_iter, tol, rolling, window, step
///   [coherence]  smoothing, pairs (foreign:inst, ...)
///   [train]      model, architecture, optimizer and split settings, lambdas
///   [backtest]   decile, cost_bp, signal_lag, block_length, replications, level
///
/// Relative paths resolve against the directory holding the file.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string source = "synth";
  std::filesystem::path input;
  std::filesystem::path output = "flowlab_run";
  std::filesystem::path factors;
  panel::ColumnMapping columns;
  panel::CleaningConfig cleaning;
  synth::SynthConfig synth;
  panel::NormalizerSpec normalize{panel::FlowNormalizer::MatchedFilter, filters::kDefaultZscoreWindow, 5.0};
  IcaSettings ica;
  CoherenceSettings coherence;
  TrainSettings train;
  BacktestSettings backtest;

  /// Applies `seed` to every seeded stage through independent derived streams.
  void set_seed(std::uint64_t master);

  /// Fails fast on anything a later stage would reject.
  /// Errors: Error("config", "InvalidValue" | "MissingPath").
  void validate() const;
};

/// Parses the file, rejecting unknown sections and keys.
/// Errors: Error("config", "UnreadableFile" | "UnknownKey" | "InvalidValue").
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
[[nodiscard]] RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

/// Seed precedence: explicit flag, then FLOWLAB_SEED, then the file.
[[nodiscard]] std::optional<std::uint64_t> seed_override(std::optional<std::uint64_t> flag);

[[nodiscard]] std::optional<GroupPair> parse_pair(std::string_view text);

}  // namespace flowlab::cli
