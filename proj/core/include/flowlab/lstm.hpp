#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace flowlab::predict {

struct Architecture {
  int input_dim = 3;
  int lookback = 10;
  int hidden1 = 64;
  int hidden2 = 32;
  int heads = 4;
  int key_dim = 32;
  double dropout = 0.2;

  void validate() const;
};

/// Trainable tensors. LSTM gate blocks are stacked in the order input,
/// forget, candidate, output; biases are column vectors.
struct Parameters {
  Eigen::MatrixXd wx1, wh1, b1;  // layer 1: 4*hidden1 x input_dim, 4*hidden1 x hidden1
  Eigen::MatrixXd wx2, wh2, b2;  // layer 2: 4*hidden2 x hidden1, 4*hidden2 x hidden2
  Eigen::MatrixXd wq, bq;        // heads*key_dim x hidden2
  Eigen::MatrixXd wk, bk;        // heads*key_dim x hidden1
  Eigen::MatrixXd wv, bv;        // heads*key_dim x hidden1
  Eigen::MatrixXd wo, bo;        // hidden2 x heads*key_dim
  Eigen::MatrixXd w_out, b_out;  // 1 x hidden2, 1 x 1

  static constexpr std::array<std::string_view, 16> kNames{
      "wx1", "wh1", "b1", "wx2", "wh2", "b2", "wq", "bq",
      "wk",  "bk",  "wv", "bv",  "wo",  "bo", "w_out", "b_out"};

  template <typename F>
  void visit(F&& f) {
    Eigen::MatrixXd* all[] = {&wx1, &wh1, &b1, &wx2, &wh2, &b2, &wq, &bq,
                              &wk,  &bk,  &wv, &bv,  &wo,  &bo, &w_out, &b_out};
    for (std::size_t k = 0; k < kNames.size(); ++k) f(kNames[k], *all[k]);
  }
  template <typename F>
  void visit(F&& f) const {
    const Eigen::MatrixXd* all[] = {&wx1, &wh1, &b1, &wx2, &wh2, &b2, &wq, &bq,
                                    &wk,  &bk,  &wv, &bv,  &wo,  &bo, &w_out, &b_out};
    for (std::size_t k = 0; k < kNames.size(); ++k) f(kNames[k], *all[k]);
  }

  /// Same shapes, all zero.
  [[nodiscard]] Parameters zeros_like() const;
  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] bool all_finite() const;
};

/// Two stacked LSTM layers, multi-head attention whose query is the final
/// layer-2 state and whose keys/values are the layer-1 output sequence, a
/// residual add of the query, and an affine scalar head.
///
/// Inputs are standardized with (x - feature_mean) / feature_sd before the
/// network and outputs mapped back with target_mean + target_sd * y.
struct LstmModel {
  Architecture arch;
  Parameters params;
  Eigen::Vector3d feature_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d feature_sd = Eigen::Vector3d::Ones();
  double target_mean = 0.0;
  double target_sd = 1.0;

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, where
  /// fan_in is the number of inputs feeding the unit.
  [[nodiscard]] static LstmModel initialize(const Architecture& arch, std::uint64_t seed);
  [[nodiscard]] static LstmModel zeros(const Architecture& arch);

  [[nodiscard]] std::size_t parameter_count() const { return params.count(); }
};

struct ForwardResult {
  double prediction = 0.0;
  /// Attention mass per lag (oldest first), averaged over heads.
  Eigen::VectorXd attention_profile;
};

/// Single-sample forward pass on a lookback x input_dim matrix (oldest row
/// first). Dropout is active only in train mode, with masks drawn from
/// `seed`. Throws Error("predict", "NonFiniteParameter").
[[nodiscard]] ForwardResult lstm_forward(const LstmModel& model, const Eigen::MatrixXd& inputs,
                                         bool train_mode = false, std::uint64_t seed = 0);

/// A batch in network space: one (input_dim x batch) matrix per time step,
/// already standardized, and standardized targets.
struct Batch {
  std::vector<Eigen::MatrixXd> steps;
  Eigen::RowVectorXd targets;

  [[nodiscard]] Eigen::Index size() const { return targets.size(); }
};

struct BatchOutput {
  Eigen::RowVectorXd predictions;
  /// lookback x batch, head-averaged attention weights.
  Eigen::MatrixXd attention;
};

/// Network-space forward pass without dropout.
[[nodiscard]] BatchOutput forward_batch(const LstmModel& model, const Batch& batch);

/// Mean squared error over the batch and, when `gradient` is non-null, its
/// gradient with respect to every parameter. `dropout_seed` enables dropout.
double loss_and_gradient(const LstmModel& model, const Batch& batch, Parameters* gradient,
                         const std::uint64_t* dropout_seed = nullptr);

}  // namespace flowlab::predict
