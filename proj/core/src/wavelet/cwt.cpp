#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/stats.hpp"
#include "flowlab/wavelet.hpp"

namespace flowlab::wavelet {

double fourier_period(double scale, double omega0) {
  return scale * 4.0 * std::numbers::pi / (omega0 + std::sqrt(2.0 + omega0 * omega0));
}

int band_of_scale(double scale) {
  if (scale < 4.0) return 0;
  if (scale < 8.0) return 1;
  if (scale < 16.0) return 2;
  return 3;
}

namespace {

// conj(psi_s[m]) for m in [-half, half].
std::vector<std::complex<double>> conjugate_kernel(double scale, double omega0, long half) {
  const double norm = std::pow(std::numbers::pi, -0.25) / std::sqrt(scale);
  std::vector<std::complex<double>> k(static_cast<std::size_t>(2 * half + 1));
  for (long m = -half; m <= half; ++m) {
    const double eta = static_cast<double>(m) / scale;
    const double envelope = norm * std::exp(-0.5 * eta * eta);
    k[static_cast<std::size_t>(m + half)] = {envelope * std::cos(omega0 * eta),
                                             -envelope * std::sin(omega0 * eta)};
  }
  return k;
}

}  // namespace

CwtField cwt(std::span<const double> series) { return cwt(series, kDyadicScales); }

CwtField cwt(std::span<const double> series, std::span<const double> scales) {
  if (series.size() < kMinLength) {
    throw Error("wavelet", "TooShort", fmt::format("need >= {} samples, got {}", kMinLength, series.size()));
  }
  for (double v : series) {
    if (!std::isfinite(v)) throw PreconditionError("wavelet", "series contains non-finite values");
  }
  const double mu = stats::mean(series);
  const double sd = stats::sample_sd(series);
  if (!(sd > 0.0)) throw Error("wavelet", "ConstantSeries", "zero variance");

  const auto T = static_cast<long>(series.size());
  std::vector<double> z(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) z[t] = (series[t] - mu) / sd;

  CwtField field;
  field.scales.assign(scales.begin(), scales.end());
  field.coefficients.resize(static_cast<Eigen::Index>(scales.size()), T);
  field.in_cone.resize(static_cast<Eigen::Index>(scales.size()), T);
  for (std::size_t j = 0; j < scales.size(); ++j) {
    const double s = scales[j];
    if (!(s > 0.0)) throw PreconditionError("wavelet", "scales must be positive");
    const long half = static_cast<long>(std::ceil(kKernelHalfWidth * s));
    const auto kernel = conjugate_kernel(s, field.omega0, half);
    const double efold = std::numbers::sqrt2 * s;
    const auto row = static_cast<Eigen::Index>(j);
    for (long n = 0; n < T; ++n) {
      const long lo = std::max(-half, -n);
      const long hi = std::min(half, T - 1 - n);
      double re = 0.0, im = 0.0;
      for (long m = lo; m <= hi; ++m) {
        const double x = z[static_cast<std::size_t>(n + m)];
        const auto& k = kernel[static_cast<std::size_t>(m + half)];
        re += x * k.real();
        im += x * k.imag();
      }
      field.coefficients(row, n) = {re, im};
      field.in_cone(row, n) =
          static_cast<double>(n) < efold || static_cast<double>(T - 1 - n) < efold;
    }
  }
  return field;
}

}  // namespace flowlab::wavelet
