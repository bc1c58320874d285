#pragma once

#include <array>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace flowlab::wavelet {

inline constexpr double kOmega0 = 6.0;
inline constexpr std::array<double, 5> kDyadicScales{2.0, 4.0, 8.0, 16.0, 32.0};
inline constexpr std::size_t kMinLength = 64;
/// Kernel support in units of scale on each side of the centre.
inline constexpr double kKernelHalfWidth = 6.0;

using ConeMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Fourier period (in samples) of a Morlet wavelet at `scale`.
[[nodiscard]] double fourier_period(double scale, double omega0 = kOmega0);

/// Continuous wavelet transform on the given scales, rows = scales, columns = time.
struct CwtField {
  std::vector<double> scales;
  Eigen::MatrixXcd coefficients;
  /// true where the cell lies within sqrt(2) * scale of either edge.
  ConeMask in_cone;
  double omega0 = kOmega0;

  [[nodiscard]] Eigen::Index length() const { return coefficients.cols(); }
};

/// Morlet CWT by direct time-domain convolution with L2-normalized wavelets
/// (1/sqrt(s)) psi(t/s), zero padding outside the series. The series is
/// z-scored first. Errors: Error("wavelet", "TooShort") for fewer than 64
/// samples and Error("wavelet", "ConstantSeries") for zero variance.
[[nodiscard]] CwtField cwt(std::span<const double> series);
[[nodiscard]] CwtField cwt(std::span<const double> series, std::span<const double> scales);

/// Scale band index for a scale: [2,4) -> 0, [4,8) -> 1, [8,16) -> 2, >= 16 -> 3.
[[nodiscard]] int band_of_scale(double scale);

inline constexpr std::array<const char*, 4> kBandLabels{"2-4d", "4-8d", "8-16d", "16-32d"};

struct CoherenceField {
  std::vector<double> scales;
  /// Squared coherence in [0, 1], rows = scales, columns = time.
  Eigen::MatrixXd coherence;
  ConeMask in_cone;
  std::array<double, 4> band_means{};
};

/// Pointwise |Wa Wb*|^2 / (|Wa|^2 |Wb|^2) without any smoothing. Identically
/// one wherever defined, which is why coherence() must smooth.
[[nodiscard]] Eigen::MatrixXd unsmoothed_ratio(const CwtField& a, const CwtField& b);

/// Smoothed wavelet coherence. Scale-normalized auto- and cross-spectra are
/// averaged over a centred moving window of `smoothing_window` samples
/// (truncated at the edges) and then over adjacent scales (3-point, truncated
/// at the end scales) before forming |S(Wab)|^2 / (S(|Wa|^2) S(|Wb|^2)).
/// Requires equal lengths and an odd smoothing_window >= 3.
[[nodiscard]] CoherenceField coherence(std::span<const double> a, std::span<const double> b,
                                       int smoothing_window);
[[nodiscard]] CoherenceField coherence(const CwtField& a, const CwtField& b, int smoothing_window);

/// Mean of `values` over non-cone cells per scale band.
/// Throws Error("wavelet", "EmptyBand") when a band has no usable cell.
[[nodiscard]] std::array<double, 4> band_means(std::span<const double> scales,
                                               const Eigen::MatrixXd& values,
                                               const ConeMask& in_cone);

[[nodiscard]] std::array<double, 4> band_summary(const CoherenceField& field);

/// Mean |W|^2 per band over non-cone cells.
[[nodiscard]] std::array<double, 4> band_energy(const CwtField& field);

}  // namespace flowlab::wavelet
