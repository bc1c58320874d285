#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowlab/error.hpp"
#include "flowlab/predict.hpp"
#include "flowlab/stats.hpp"

namespace flowlab::predict {

namespace {

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

std::optional<double> long_short_ir(std::span<const double> predictions,
                                    const std::vector<SequenceSample>& samples) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (samples[a].date != samples[b].date) return samples[a].date < samples[b].date;
    if (predictions[a] != predictions[b]) return predictions[a] > predictions[b];
    return samples[a].ticker < samples[b].ticker;
  });
  std::vector<double> daily;
  for (std::size_t lo = 0; lo < idx.size();) {
    std::size_t hi = lo;
    while (hi < idx.size() && samples[idx[hi]].date == samples[idx[lo]].date) ++hi;
    const std::size_t n = hi - lo;
    if (n >= 2) {
      const std::size_t k = std::max<std::size_t>(1, n / 10);
      double top = 0.0, bottom = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        top += samples[idx[lo + j]].target;
        bottom += samples[idx[hi - 1 - j]].target;
      }
      daily.push_back((top - bottom) / static_cast<double>(k));
    }
    lo = hi;
  }
  if (daily.size() < 2) return std::nullopt;
  const double sd = stats::sample_sd(daily);
  if (!(sd > 0.0)) return std::nullopt;
  return stats::mean(daily) / sd * std::sqrt(252.0);
}

}  // namespace

PredictionReport evaluate(std::span<const double> predictions, const std::vector<SequenceSample>& samples) {
  if (samples.empty()) throw PreconditionError("predict", "test split is empty");
  if (predictions.size() != samples.size()) {
    throw PreconditionError("predict", "prediction count differs from sample count");
  }
  const std::size_t n = samples.size();
  std::vector<double> realized(n);
  for (std::size_t i = 0; i < n; ++i) realized[i] = samples[i].target;

  PredictionReport r;
  r.n = n;
  double sq = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = predictions[i] - realized[i];
    sq += e * e;
    const int sp = sign_of(predictions[i]);
    if (sp != 0 && sp == sign_of(realized[i])) ++hits;
  }
  r.rmse = std::sqrt(sq / static_cast<double>(n));
  r.hit_rate = static_cast<double>(hits) / static_cast<double>(n);
  r.prediction_std = stats::sample_sd(predictions);
  r.target_std = stats::sample_sd(realized);
  r.collapsed = !(r.prediction_std > 0.0);
  r.pearson_correlation = stats::pearson(predictions, realized).value_or(0.0);
  r.information_ratio = long_short_ir(predictions, samples);
  return r;
}

PredictionReport evaluate(const LstmModel& model, const std::vector<SequenceSample>& samples) {
  if (samples.empty()) throw PreconditionError("predict", "test split is empty");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> predictions;
  predictions.reserve(samples.size());
  Eigen::VectorXd profile = Eigen::VectorXd::Zero(model.arch.lookback);
  constexpr std::size_t chunk = 2048;
  for (std::size_t start = 0; start < order.size(); start += chunk) {
    const auto len = std::min(chunk, order.size() - start);
    const auto batch = make_batch(model, samples, std::span(order).subspan(start, len));
    const auto out = forward_batch(model, batch);
    for (Eigen::Index b = 0; b < out.predictions.size(); ++b) {
      predictions.push_back(model.target_mean + model.target_sd * out.predictions(b));
    }
    profile += out.attention.rowwise().sum();
  }
  profile /= static_cast<double>(samples.size());
  auto report = evaluate(predictions, samples);
  report.attention_weight_profile.assign(profile.data(), profile.data() + profile.size());
  return report;
}

PredictionReport evaluate(const LinearModel& model, const std::vector<SequenceSample>& samples) {
  const Eigen::VectorXd p = model.predict(flatten_features(samples));
  return evaluate(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), samples);
}

}  // namespace flowlab::predict
