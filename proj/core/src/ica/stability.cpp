#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/ica.hpp"

namespace flowlab::ica {

std::vector<double> StabilityTrace::drifts() const {
  std::vector<double> out;
  for (const auto& w : windows) {
    if (w.drift) out.push_back(*w.drift);
  }
  return out;
}

namespace {

Eigen::Matrix3d unit_columns(const Eigen::Matrix3d& m) {
  Eigen::Matrix3d out = m;
  for (int j = 0; j < 3; ++j) {
    const double n = m.col(j).norm();
    if (n > 0.0) out.col(j) /= n;
  }
  return out;
}

}  // namespace

StabilityTrace rolling_stability(const panel::FlowMatrix& flows, const StabilityOptions& options,
                                 const std::vector<FactorSeries>& factors) {
  const auto T = static_cast<long>(flows.rows());
  if (options.window < kMinObservations || options.step < 1) {
    throw PreconditionError("ica", fmt::format("window must be >= {} and step >= 1", kMinObservations));
  }
  if (T < options.window + options.step) {
    throw PreconditionError("ica", fmt::format("rolling stability needs T >= window + step ({} + {}), got {}",
                                               options.window, options.step, T));
  }

  StabilityTrace trace;
  std::optional<Eigen::Matrix3d> previous;
  for (long start = 0; start + options.window <= T; start += options.step) {
    const Eigen::MatrixXd block = flows.values.middleRows(start, options.window);
    IcaResult result = run_ica(block, options.ica);
    if (previous) result = align_to_mixing(result, *previous);

    StabilityWindow w;
    w.start = flows.dates[static_cast<std::size_t>(start)];
    w.end = flows.dates[static_cast<std::size_t>(start + options.window - 1)];
    w.mixing = unit_columns(result.mixing);
    w.converged = result.converged;
    w.iterations = result.iterations;
    if (previous) w.drift = (w.mixing - *previous).norm();
    if (!factors.empty()) {
      const std::vector<Date> dates(flows.dates.begin() + start,
                                    flows.dates.begin() + start + options.window);
      const auto table = interpret(dates, result.components, factors);
      w.top_factor_ic1 = table.top_row(0);
    }
    previous = w.mixing;
    trace.windows.push_back(std::move(w));
  }
  return trace;
}

}  // namespace flowlab::ica
