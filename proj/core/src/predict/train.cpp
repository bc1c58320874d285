#include <cmath>
#include <algorithm>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/predict.hpp"
#include "flowlab/rng.hpp"

namespace flowlab::predict {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw PreconditionError("predict", "learning_rate must be positive");
  if (patience < 1) throw PreconditionError("predict", "patience must be >= 1");
  if (max_epochs < 1) throw PreconditionError("predict", "max_epochs must be >= 1");
  if (batch_size < 1) throw PreconditionError("predict", "batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw PreconditionError("predict", "Adam moments must lie in [0, 1) and epsilon > 0");
  }
  if (train_fraction <= 0.0 || validation_fraction <= 0.0 || test_fraction < 0.0 ||
      std::abs(train_fraction + validation_fraction + test_fraction - 1.0) > 1e-9) {
    throw PreconditionError("predict", fmt::format("split fractions must be positive and sum to 1, got {}/{}/{}",
                                                   train_fraction, validation_fraction, test_fraction));
  }
}

namespace {

constexpr std::size_t kEvalChunk = 2048;

std::vector<Eigen::MatrixXd*> refs(Parameters& p) {
  std::vector<Eigen::MatrixXd*> out;
  p.visit([&](std::string_view, Eigen::MatrixXd& m) { out.push_back(&m); });
  return out;
}

void fit_standardization(LstmModel& model, const std::vector<SequenceSample>& train) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  double n = 0.0;
  for (const auto& s : train) {
    sum += s.inputs.colwise().sum().transpose();
    n += static_cast<double>(s.inputs.rows());
  }
  const Eigen::Vector3d mean = sum / n;
  Eigen::Vector3d ss = Eigen::Vector3d::Zero();
  for (const auto& s : train) {
    ss += (s.inputs.rowwise() - mean.transpose()).array().square().colwise().sum().matrix().transpose();
  }
  Eigen::Vector3d sd = (ss / std::max(n - 1.0, 1.0)).cwiseSqrt();
  for (int g = 0; g < 3; ++g) {
    if (!(sd(g) > 0.0)) sd(g) = 1.0;
  }
  model.feature_mean = mean;
  model.feature_sd = sd;

  double ty = 0.0;
  for (const auto& s : train) ty += s.target;
  const double tm = ty / static_cast<double>(train.size());
  double tss = 0.0;
  for (const auto& s : train) tss += (s.target - tm) * (s.target - tm);
  const double tsd = train.size() > 1 ? std::sqrt(tss / static_cast<double>(train.size() - 1)) : 0.0;
  model.target_mean = tm;
  model.target_sd = tsd > 0.0 ? tsd : 1.0;
}

}  // namespace

Batch make_batch(const LstmModel& model, const std::vector<SequenceSample>& samples,
                 std::span<const std::size_t> order) {
  const int K = model.arch.lookback;
  const auto B = static_cast<Eigen::Index>(order.size());
  Batch batch;
  batch.steps.assign(static_cast<std::size_t>(K), Eigen::MatrixXd(3, B));
  batch.targets.resize(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& s = samples[order[static_cast<std::size_t>(b)]];
    if (s.inputs.rows() != K || s.inputs.cols() != 3) {
      throw PreconditionError("predict", fmt::format("sample inputs must be {} x 3", K));
    }
    for (int k = 0; k < K; ++k) {
      batch.steps[static_cast<std::size_t>(k)].col(b) =
          (s.inputs.row(k).transpose() - model.feature_mean).cwiseQuotient(model.feature_sd);
    }
    batch.targets(b) = (s.target - model.target_mean) / model.target_sd;
  }
  return batch;
}

double validation_loss(const LstmModel& model, const std::vector<SequenceSample>& samples) {
  if (samples.empty()) throw PreconditionError("predict", "validation split is empty");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += kEvalChunk) {
    const auto len = std::min(kEvalChunk, order.size() - start);
    const auto batch = make_batch(model, samples, std::span(order).subspan(start, len));
    total += loss_and_gradient(model, batch, nullptr) * static_cast<double>(len);
  }
  return total / static_cast<double>(samples.size());
}

std::vector<double> predict(const LstmModel& model, const std::vector<SequenceSample>& samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < order.size(); start += kEvalChunk) {
    const auto len = std::min(kEvalChunk, order.size() - start);
    const auto batch = make_batch(model, samples, std::span(order).subspan(start, len));
    const auto result = forward_batch(model, batch);
    for (Eigen::Index b = 0; b < result.predictions.size(); ++b) {
      out.push_back(model.target_mean + model.target_sd * result.predictions(b));
    }
  }
  return out;
}

TrainResult train(LstmModel model, const DataSplit& split, const TrainConfig& cfg) {
  cfg.validate();
  if (split.train.empty()) throw PreconditionError("predict", "train split is empty");
  if (split.validation.empty()) throw PreconditionError("predict", "validation split is empty");
  fit_standardization(model, split.train);

  Parameters m = model.params.zeros_like();
  Parameters v = model.params.zeros_like();
  Parameters grad = model.params.zeros_like();
  const auto p_refs = refs(model.params);
  const auto m_refs = refs(m);
  const auto v_refs = refs(v);
  const auto g_refs = refs(grad);

  TrainResult result;
  result.log.parameter_count = model.parameter_count();
  Parameters best = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  int wait = 0;
  long step = 0;

  Rng shuffle(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.below(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const auto len = std::min(batch_size, order.size() - start);
      const auto batch = make_batch(model, split.train, std::span(order).subspan(start, len));
      for (auto* g : g_refs) g->setZero();
      ++step;
      const std::uint64_t dropout_seed = derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(step));
      const double loss = loss_and_gradient(model, batch, &grad, &dropout_seed);
      if (!std::isfinite(loss)) {
        throw Error("predict", "DivergedLoss", fmt::format("non-finite training loss at epoch {}", epoch));
      }
      epoch_loss += loss * static_cast<double>(len);

      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < p_refs.size(); ++k) {
        auto& mk = *m_refs[k];
        auto& vk = *v_refs[k];
        const auto& gk = *g_refs[k];
        mk = cfg.beta1 * mk + (1.0 - cfg.beta1) * gk;
        vk = cfg.beta2 * vk + (1.0 - cfg.beta2) * gk.cwiseAbs2();
        p_refs[k]->array() -= cfg.learning_rate * (mk.array() / c1) / ((vk.array() / c2).sqrt() + cfg.epsilon);
      }
    }
    const double val = validation_loss(model, split.validation);
    if (!std::isfinite(val)) {
      throw Error("predict", "DivergedLoss", fmt::format("non-finite validation loss at epoch {}", epoch));
    }
    result.log.epochs.push_back({epoch, epoch_loss / static_cast<double>(order.size()), val});
    if (val < best_val) {
      best_val = val;
      best = model.params;
      result.log.best_epoch = epoch;
      wait = 0;
    } else if (++wait >= cfg.patience) {
      result.log.early_stopped = true;
      break;
    }
  }
  model.params = std::move(best);
  result.log.best_validation_loss = best_val;
  result.model = std::move(model);
  return result;
}

}  // namespace flowlab::predict
