#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/predict.hpp"

namespace flowlab::predict {

std::vector<SequenceSample> build_sequences(const panel::Panel& market, const panel::NormalizedFlows& flows,
                                            int lookback) {
  if (lookback < 1) throw PreconditionError("predict", "lookback must be positive");
  const auto K = static_cast<std::size_t>(lookback);

  std::map<std::string, std::map<Date, const panel::StockFlow*>, std::less<>> by_ticker;
  for (const auto& row : flows.rows) by_ticker[row.ticker][row.date] = &row;

  std::vector<SequenceSample> out;
  for (std::size_t i = 0; i < market.universe().size(); ++i) {
    const auto it = by_ticker.find(market.universe()[i]);
    if (it == by_ticker.end()) continue;
    const auto history = market.history(i);
    std::vector<const panel::StockFlow*> aligned(history.size(), nullptr);
    for (std::size_t t = 0; t < history.size(); ++t) {
      const auto f = it->second.find(history[t].date);
      if (f != it->second.end()) aligned[t] = f->second;
    }
    std::size_t run = 0;  // consecutive defined records ending at t
    for (std::size_t t = 0; t + 1 < history.size(); ++t) {
      run = aligned[t] != nullptr ? run + 1 : 0;
      if (run < K) continue;
      SequenceSample s;
      s.inputs.resize(lookback, 3);
      for (std::size_t k = 0; k < K; ++k) {
        const auto* f = aligned[t + 1 - K + k];
        for (int g = 0; g < 3; ++g) s.inputs(static_cast<Eigen::Index>(k), g) = f->values[g];
      }
      s.target = history[t + 1].close / history[t].close - 1.0;
      s.ticker = history[t].ticker;
      s.date = history[t].date;
      out.push_back(std::move(s));
    }
  }
  if (out.empty()) {
    throw Error("predict", "EmptyDataset", fmt::format("no ticker has {} days of history plus a next-day return", lookback));
  }
  std::stable_sort(out.begin(), out.end(), [](const SequenceSample& a, const SequenceSample& b) {
    return a.date < b.date;
  });
  return out;
}

std::vector<SequenceSample> build_sequences(const panel::Panel& market, const panel::NormalizerSpec& spec,
                                            int lookback) {
  return build_sequences(market, panel::normalize_panel(market, spec), lookback);
}

DataSplit chronological_split(const std::vector<SequenceSample>& samples, double train_fraction,
                              double validation_fraction) {
  if (!(train_fraction > 0.0) || !(validation_fraction >= 0.0) ||
      train_fraction + validation_fraction > 1.0) {
    throw PreconditionError("predict", "split fractions must be non-negative and sum to at most 1");
  }
  std::vector<Date> dates;
  for (const auto& s : samples) dates.push_back(s.date);
  std::sort(dates.begin(), dates.end());
  dates.erase(std::unique(dates.begin(), dates.end()), dates.end());
  const auto D = static_cast<double>(dates.size());
  const auto n_train = static_cast<std::size_t>(train_fraction * D);
  const auto n_val = static_cast<std::size_t>(validation_fraction * D);

  DataSplit split;
  for (const auto& s : samples) {
    const auto rank = static_cast<std::size_t>(std::lower_bound(dates.begin(), dates.end(), s.date) - dates.begin());
    if (rank < n_train) {
      split.train.push_back(s);
    } else if (rank < n_train + n_val) {
      split.validation.push_back(s);
    } else {
      split.test.push_back(s);
    }
  }
  return split;
}

Eigen::MatrixXd flatten_features(const std::vector<SequenceSample>& samples) {
  if (samples.empty()) return {};
  const auto rows = samples.front().inputs.rows();
  const auto cols = samples.front().inputs.cols();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), rows * cols);
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& in = samples[n].inputs;
    for (Eigen::Index k = 0; k < rows; ++k) {
      for (Eigen::Index g = 0; g < cols; ++g) X(static_cast<Eigen::Index>(n), k * cols + g) = in(k, g);
    }
  }
  return X;
}

Eigen::VectorXd targets_of(const std::vector<SequenceSample>& samples) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t n = 0; n < samples.size(); ++n) y(static_cast<Eigen::Index>(n)) = samples[n].target;
  return y;
}

}  // namespace flowlab::predict
