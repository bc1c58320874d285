#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/wavelet.hpp"

namespace flowlab::wavelet {

Eigen::MatrixXd unsmoothed_ratio(const CwtField& a, const CwtField& b) {
  if (a.coefficients.rows() != b.coefficients.rows() || a.length() != b.length()) {
    throw PreconditionError("wavelet", "transforms differ in shape");
  }
  Eigen::MatrixXd out(a.coefficients.rows(), a.length());
  for (Eigen::Index j = 0; j < out.rows(); ++j) {
    for (Eigen::Index n = 0; n < out.cols(); ++n) {
      const auto wa = a.coefficients(j, n);
      const auto wb = b.coefficients(j, n);
      const double denom = std::norm(wa) * std::norm(wb);
      out(j, n) = denom > 0.0 ? std::norm(wa * std::conj(wb)) / denom : 0.0;
    }
  }
  return out;
}

namespace {

// Centred moving average along time, window truncated at the edges.
template <typename Matrix>
Matrix smooth_time(const Matrix& m, int window) {
  const Eigen::Index half = window / 2;
  const Eigen::Index T = m.cols();
  Matrix out(m.rows(), T);
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    for (Eigen::Index n = 0; n < T; ++n) {
      const Eigen::Index lo = std::max<Eigen::Index>(0, n - half);
      const Eigen::Index hi = std::min<Eigen::Index>(T - 1, n + half);
      typename Matrix::Scalar acc{};
      for (Eigen::Index k = lo; k <= hi; ++k) acc += m(j, k);
      out(j, n) = acc / static_cast<double>(hi - lo + 1);
    }
  }
  return out;
}

// Three-point average over neighbouring scales, truncated at the ends.
template <typename Matrix>
Matrix smooth_scale(const Matrix& m) {
  const Eigen::Index S = m.rows();
  Matrix out(S, m.cols());
  for (Eigen::Index j = 0; j < S; ++j) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, j - 1);
    const Eigen::Index hi = std::min<Eigen::Index>(S - 1, j + 1);
    for (Eigen::Index n = 0; n < m.cols(); ++n) {
      typename Matrix::Scalar acc{};
      for (Eigen::Index k = lo; k <= hi; ++k) acc += m(k, n);
      out(j, n) = acc / static_cast<double>(hi - lo + 1);
    }
  }
  return out;
}

}  // namespace

CoherenceField coherence(std::span<const double> a, std::span<const double> b, int smoothing_window) {
  if (a.size() != b.size()) {
    throw PreconditionError("wavelet", fmt::format("series lengths differ ({} vs {})", a.size(), b.size()));
  }
  return coherence(cwt(a), cwt(b), smoothing_window);
}

CoherenceField coherence(const CwtField& a, const CwtField& b, int smoothing_window) {
  if (smoothing_window < 3 || smoothing_window % 2 == 0) {
    throw PreconditionError("wavelet", fmt::format("smoothing_window must be odd and >= 3, got {}",
                                                   smoothing_window));
  }
  if (a.coefficients.rows() != b.coefficients.rows() || a.length() != b.length() ||
      a.scales != b.scales) {
    throw PreconditionError("wavelet", "transforms differ in shape or scales");
  }
  const Eigen::Index S = a.coefficients.rows();
  const Eigen::Index T = a.length();
  Eigen::MatrixXd power_a(S, T), power_b(S, T);
  Eigen::MatrixXcd cross(S, T);
  for (Eigen::Index j = 0; j < S; ++j) {
    const double inv_s = 1.0 / a.scales[static_cast<std::size_t>(j)];
    for (Eigen::Index n = 0; n < T; ++n) {
      const auto wa = a.coefficients(j, n);
      const auto wb = b.coefficients(j, n);
      power_a(j, n) = std::norm(wa) * inv_s;
      power_b(j, n) = std::norm(wb) * inv_s;
      cross(j, n) = wa * std::conj(wb) * inv_s;
    }
  }
  const Eigen::MatrixXd sa = smooth_scale(smooth_time(power_a, smoothing_window));
  const Eigen::MatrixXd sb = smooth_scale(smooth_time(power_b, smoothing_window));
  const Eigen::MatrixXcd sc = smooth_scale(smooth_time(cross, smoothing_window));

  CoherenceField field;
  field.scales = a.scales;
  field.in_cone = a.in_cone;
  field.coherence.resize(S, T);
  for (Eigen::Index j = 0; j < S; ++j) {
    for (Eigen::Index n = 0; n < T; ++n) {
      const double denom = sa(j, n) * sb(j, n);
      field.coherence(j, n) = denom > 0.0 ? std::clamp(std::norm(sc(j, n)) / denom, 0.0, 1.0) : 0.0;
    }
  }
  field.band_means = band_summary(field);
  return field;
}

std::array<double, 4> band_means(std::span<const double> scales, const Eigen::MatrixXd& values,
                                 const ConeMask& in_cone) {
  std::array<double, 4> sum{};
  std::array<std::size_t, 4> count{};
  for (std::size_t j = 0; j < scales.size(); ++j) {
    const int band = band_of_scale(scales[j]);
    const auto row = static_cast<Eigen::Index>(j);
    for (Eigen::Index n = 0; n < values.cols(); ++n) {
      if (in_cone(row, n)) continue;
      sum[static_cast<std::size_t>(band)] += values(row, n);
      ++count[static_cast<std::size_t>(band)];
    }
  }
  std::array<double, 4> out{};
  for (std::size_t k = 0; k < 4; ++k) {
    if (count[k] == 0) throw Error("wavelet", "EmptyBand", fmt::format("band {} has no cells outside the cone", kBandLabels[k]));
    out[k] = sum[k] / static_cast<double>(count[k]);
  }
  return out;
}

std::array<double, 4> band_summary(const CoherenceField& field) {
  return band_means(field.scales, field.coherence, field.in_cone);
}

std::array<double, 4> band_energy(const CwtField& field) {
  const Eigen::MatrixXd power = field.coefficients.cwiseAbs2();
  return band_means(field.scales, power, field.in_cone);
}

}  // namespace flowlab::wavelet
