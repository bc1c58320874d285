#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flowlab/date.hpp"
#include "flowlab/flows.hpp"
#include "flowlab/lstm.hpp"
#include "flowlab/panel.hpp"

namespace flowlab::predict {

inline constexpr int kDefaultLookback = 10;

struct SequenceSample {
  /// lookback x 3 normalized flows, oldest row first.
  Eigen::MatrixXd inputs;
  /// Close-to-close simple return from `date` to the next record.
  double target = 0.0;
  std::string ticker;
  /// Date of the last input row.
  Date date{};
};

/// One sample per (ticker, date t) having `lookback` consecutive records
/// ending at t with defined flows and a record at t + 1. A ticker with n
/// fully defined records yields n - lookback samples. Output is ordered by
/// (date, ticker). Throws Error("predict", "EmptyDataset").
[[nodiscard]] std::vector<SequenceSample> build_sequences(const panel::Panel& market,
                                                          const panel::NormalizedFlows& flows,
                                                          int lookback = kDefaultLookback);
[[nodiscard]] std::vector<SequenceSample> build_sequences(const panel::Panel& market,
                                                          const panel::NormalizerSpec& spec,
                                                          int lookback = kDefaultLookback);

struct DataSplit {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> validation;
  std::vector<SequenceSample> test;
};

/// Pooled chronological split on distinct sample dates: the first
/// floor(train_fraction * D) dates go to train, the next
/// floor(validation_fraction * D) to validation, the rest to test.
[[nodiscard]] DataSplit chronological_split(const std::vector<SequenceSample>& samples,
                                            double train_fraction = 0.8,
                                            double validation_fraction = 0.1);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int patience = 10;
  int max_epochs = 200;
  int batch_size = 256;
  double train_fraction = 0.8;
  double validation_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  /// Mean mini-batch loss with dropout, in standardized target units.
  double train_loss = 0.0;
  /// Full validation loss without dropout, standardized units.
  double validation_loss = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_validation_loss = 0.0;
  bool early_stopped = false;
  std::size_t parameter_count = 0;
};

struct TrainResult {
  LstmModel model;
  TrainingLog log;
};

/// Fits the standardization on the train split, then minimizes MSE with Adam
/// on shuffled mini-batches until validation loss has not improved for
/// `patience` epochs or max_epochs is reached. Returns the parameters of the
/// best validation epoch. Throws Error("predict", "DivergedLoss").
[[nodiscard]] TrainResult train(LstmModel model, const DataSplit& split, const TrainConfig& cfg);

/// Validation loss of a model in standardized units, as recorded in the log.
[[nodiscard]] double validation_loss(const LstmModel& model,
                                     const std::vector<SequenceSample>& samples);

/// Builds a standardized network batch from the samples listed in `order`.
[[nodiscard]] Batch make_batch(const LstmModel& model, const std::vector<SequenceSample>& samples,
                               std::span<const std::size_t> order);

[[nodiscard]] std::vector<double> predict(const LstmModel& model,
                                          const std::vector<SequenceSample>& samples);

/// Linear model on standardized features with an unpenalized intercept.
struct LinearModel {
  std::string kind;  // "ridge" or "lasso"
  double lambda = 0.0;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;
  /// Coefficients on standardized features.
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  int sweeps = 0;

  /// Coefficients on the original feature scale.
  [[nodiscard]] Eigen::VectorXd raw_coefficients() const;
  [[nodiscard]] double raw_intercept() const;
  [[nodiscard]] Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
};

/// n x (lookback * 3) design, row-major flattening of each sample's inputs.
[[nodiscard]] Eigen::MatrixXd flatten_features(const std::vector<SequenceSample>& samples);
[[nodiscard]] Eigen::VectorXd targets_of(const std::vector<SequenceSample>& samples);

/// Solves (Z'Z + lambda I) beta = Z'(y - mean y) with Z the standardized
/// design (population scale). Throws Error("predict", "SingularSystem") when
/// lambda = 0 and Z'Z is rank deficient.
[[nodiscard]] LinearModel ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                    double lambda);

struct LassoOptions {
  double tolerance = 1e-8;
  int max_sweeps = 10000;
};

/// Cyclic coordinate descent on (1/2n)||y_c - Z beta||^2 + lambda ||beta||_1.
/// Throws Error("predict", "NotConverged").
[[nodiscard]] LinearModel lasso_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                    double lambda, const LassoOptions& options = {});

/// Smallest lambda at which every LASSO coefficient is zero: max|Z' y_c| / n.
[[nodiscard]] double lasso_lambda_max(const Eigen::MatrixXd& features,
                                      const Eigen::VectorXd& targets);

/// Fits each lambda on `train` and keeps the lowest validation MSE.
[[nodiscard]] LinearModel select_lambda(const std::string& kind, std::span<const double> grid,
                                        const std::vector<SequenceSample>& train,
                                        const std::vector<SequenceSample>& validation);

struct PredictionReport {
  std::size_t n = 0;
  double rmse = 0.0;
  /// 0 when predictions have zero variance (see `collapsed`).
  double pearson_correlation = 0.0;
  double hit_rate = 0.0;
  /// Annualized mean/sd of the daily decile long-short return sorted on the
  /// prediction; absent with fewer than two usable dates or zero spread.
  std::optional<double> information_ratio;
  double prediction_std = 0.0;
  double target_std = 0.0;
  bool collapsed = false;
  /// Empty for models without attention.
  std::vector<double> attention_weight_profile;
};

/// Metrics of predictions against realized values. sign(0) predictions count
/// as misses. The long-short leg size is max(1, floor(0.1 n)) per date,
/// ties broken by ticker.
[[nodiscard]] PredictionReport evaluate(std::span<const double> predictions,
                                        const std::vector<SequenceSample>& samples);
[[nodiscard]] PredictionReport evaluate(const LstmModel& model,
                                        const std::vector<SequenceSample>& samples);
[[nodiscard]] PredictionReport evaluate(const LinearModel& model,
                                        const std::vector<SequenceSample>& samples);

/// Self-describing JSON parameter files.
void save_model(const LstmModel& model, const TrainConfig& cfg, const std::filesystem::path& path);
void save_model(const LinearModel& model, const std::filesystem::path& path);
/// "lstm", "ridge" or "lasso".
[[nodiscard]] std::string model_kind(const std::filesystem::path& path);
[[nodiscard]] LstmModel load_lstm(const std::filesystem::path& path);
[[nodiscard]] LinearModel load_linear(const std::filesystem::path& path);

}  // namespace flowlab::predict
