#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace flowlab::cli {

namespace fs = std::filesystem;

struct IngestArgs {
  fs::path input;
  fs::path config;
  fs::path output;
};

struct SynthArgs {
  fs::path config;
  fs::path output;
  fs::path truth;
  std::optional<std::uint64_t> seed;
};

struct NormalizeArgs {
  std::string method = "matched";
  fs::path panel;
  fs::path output;
  fs::path market;
  int window = filters::kDefaultZscoreWindow;
  double winsorize_sigma = 5.0;
};

struct IcaArgs {
  fs::path flows;
  fs::path factors;
  bool rolling = false;
  int window = 252;
  int step = 21;
  std::optional<std::uint64_t> seed;
  fs::path output;
};

struct CoherenceArgs {
  fs::path flows;
  std::vector<std::string> pairs;
  int smoothing = 15;
  fs::path output;
};

struct TrainArgs {
  std::string model = "lstm";
  fs::path panel;
  fs::path config;
  fs::path out;
  fs::path report;
  std::optional<std::uint64_t> seed;
};

struct BacktestArgs {
  std::string strategy = "momentum";
  fs::path panel;
  fs::path signal;
  double cost_bp = 10.0;
  double decile = 0.1;
  int signal_lag = 1;
  std::size_t block_length = 21;
  std::size_t replications = 1000;
  std::optional<std::uint64_t> seed;
  std::string label;
  fs::path output;
};

struct ReportArgs {
  fs::path run;
  fs::path output;
};

struct PipelineArgs {
  fs::path config;
  fs::path output;
  std::optional<std::uint64_t> seed;
};

void run_ingest(const IngestArgs& args);
void run_synth(const SynthArgs& args);
void run_normalize(const NormalizeArgs& args);
void run_ica(const IcaArgs& args);
void run_coherence(const CoherenceArgs& args);
void run_train(const TrainArgs& args);
void run_backtest(const BacktestArgs& args);
/// Writes summary.json and summary.txt and returns the text.
std::string run_report(const ReportArgs& args);
void run_pipeline(const PipelineArgs& args);

/// Reads either an aggregated flow matrix (date,foreign,inst,indiv) or a
/// per-stock normalized file, which is aggregated on the fly.
[[nodiscard]] panel::FlowMatrix load_flow_matrix(const fs::path& path);

}  // namespace flowlab::cli
