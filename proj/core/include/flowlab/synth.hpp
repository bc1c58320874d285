#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include <Eigen/Core>

#include "flowlab/date.hpp"
#include "flowlab/panel.hpp"

namespace flowlab::synth {

/// Marginal distribution of one latent source. All kinds have unit variance.
enum class SourceKind { Laplacian, Uniform, Sinusoid };

[[nodiscard]] std::string_view source_kind_name(SourceKind k);
[[nodiscard]] std::optional<SourceKind> parse_source_kind(std::string_view name);

/// Generator parameters. Flows follow X_t = A S_t at the market level; stock
/// i carries flow_intensity * m_i * (X_t + u_it) per unit of market cap,
/// where m_i is a static lognormal multiplier (mean one across stocks) and
/// u_it an idiosyncratic AR(1) flow that is m-weighted demeaned each day, so
/// the equal-weighted matched-filter aggregate equals flow_intensity * X_t.
/// Next-day return of stock i:
///   r_i,t+1 = return_mean + flow_to_return_coeff * signal_it + noise,
/// with signal_it the group mean of (X_t + u_it) scaled by m_i, and noise of
/// total sd return_noise_sigma split into a market-wide and an idiosyncratic
/// part by market_noise_share.
struct SynthConfig {
  int n_stocks = 100;
  int n_days = 1000;
  Eigen::Matrix3d mixing = default_mixing();
  std::array<SourceKind, 3> source_kind{SourceKind::Laplacian, SourceKind::Laplacian,
                                        SourceKind::Laplacian};
  /// Period in days of each Sinusoid-kind source.
  std::array<double, 3> sinusoid_period{16.0, 8.0, 32.0};
  double flow_to_return_coeff = 0.0;
  double return_noise_sigma = 0.0349;
  double return_mean = 0.00028;
  double market_noise_share = 0.3;
  double flow_intensity = 1e-4;
  double idio_flow_sigma = 1.0;
  double idio_flow_persistence = 0.0;
  double median_market_cap = 5e11;
  double market_cap_dispersion = 1.0;
  double multiplier_dispersion = 0.5;
  /// When set, days >= regime_break_day are mixed with mixing_after_break.
  std::optional<int> regime_break_day;
  Eigen::Matrix3d mixing_after_break = Eigen::Matrix3d::Identity();
  Date start_date = Date{std::chrono::year{2020} / 1 / 2};
  std::uint64_t seed = 42;

  static Eigen::Matrix3d default_mixing();

  /// Throws PreconditionError for out-of-range fields and
  /// Error("synth", "SingularMixing") for a non-invertible mixing matrix.
  void validate() const;
};

struct SynthPanel {
  panel::Panel panel;
  std::vector<Date> dates;
  /// T x 3 latent sources S_t.
  Eigen::MatrixXd true_sources;
  /// Mixing in force before any regime break.
  Eigen::Matrix3d true_mixing;
};

/// Deterministic in cfg (including seed).
[[nodiscard]] SynthPanel generate(const SynthConfig& cfg);

/// CSV columns: date,s1,s2,s3.
void write_truth(const SynthPanel& synth, const std::filesystem::path& path);

}  // namespace flowlab::synth
