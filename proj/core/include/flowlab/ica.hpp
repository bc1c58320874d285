#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flowlab/date.hpp"
#include "flowlab/flows.hpp"

namespace flowlab::ica {

/// Affine map z = matrix * (x - mean) giving zero-mean, identity-covariance
/// output. `matrix` = diag(eigenvalues)^(-1/2) * U^T with eigenvalues in
/// descending order.
struct WhiteningTransform {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Ones();
  Eigen::Matrix3d eigenvectors = Eigen::Matrix3d::Identity();

  /// U * diag(eigenvalues)^(1/2), the inverse of `matrix`.
  [[nodiscard]] Eigen::Matrix3d dewhitening() const;
};

struct Whitened {
  WhiteningTransform transform;
  /// T x 3, one observation per row.
  Eigen::MatrixXd data;
};

inline constexpr int kMinObservations = 30;

/// Centers and whitens T x 3 observations (sample covariance, n - 1).
/// Errors: PreconditionError for T < 30, Error("ica", "RankDeficient") when
/// an eigenvalue falls below 1e-12 times the largest.
[[nodiscard]] Whitened whiten(const Eigen::MatrixXd& observations);

struct FastIcaOptions {
  int max_iter = 1000;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

/// Outcome of FastICA on a 3 -> 3 square, noise-free model.
///
/// components = (X - mean) * unmixing^T, and X = components * mixing^T + mean
/// reconstructs the input. `rotation` is the orthogonal matrix acting on the
/// whitened data; `unmixing` = rotation * whitening matrix.
struct IcaResult {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d unmixing = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d mixing = Eigen::Matrix3d::Identity();
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::MatrixXd components;
  int iterations = 0;
  bool converged = false;
};

/// Symmetric-orthogonalization FastICA with the log-cosh contrast
/// (g = tanh, g' = 1 - tanh^2). Starts from a seeded random orthogonal
/// matrix. Converged when max_i |1 - |<w_new_i, w_old_i>|| < tol.
/// Non-convergence is reported through `converged = false` with the last
/// iterate; use require_converged() to turn it into an error.
[[nodiscard]] IcaResult fastica(const Whitened& whitened, const FastIcaOptions& options = {});

/// whiten followed by fastica.
[[nodiscard]] IcaResult run_ica(const Eigen::MatrixXd& observations,
                                const FastIcaOptions& options = {});

/// Throws Error("ica", "NotConverged") carrying the iteration count.
void require_converged(const IcaResult& result);

/// Reconstructs observations from components and mixing.
[[nodiscard]] Eigen::MatrixXd reconstruct(const IcaResult& result);

/// Signed permutation taking result components to reference order:
/// aligned component j = sign[j] * original component perm[j].
struct Alignment {
  std::array<int, 3> perm{0, 1, 2};
  std::array<double, 3> sign{1.0, 1.0, 1.0};
  double score = 0.0;
};

/// Chooses the permutation maximizing the summed |similarity| between
/// original component perm[j] and reference j; signs make each matched
/// similarity non-negative. similarity(i, j) is read from the 3 x 3 matrix.
[[nodiscard]] Alignment best_alignment(const Eigen::Matrix3d& similarity);

[[nodiscard]] IcaResult apply_alignment(const IcaResult& result, const Alignment& alignment);

/// Orders components by descending mixing-column norm and signs each so its
/// mixing column sums to a non-negative value. fastica() returns this form.
[[nodiscard]] IcaResult canonical_order(const IcaResult& result);

/// Aligns to reference source series (T x 3, same rows as components) by
/// Pearson correlation.
[[nodiscard]] IcaResult align_components(const IcaResult& result,
                                         const Eigen::MatrixXd& reference_series);

/// Aligns to a reference mixing matrix by cosine similarity of columns.
[[nodiscard]] IcaResult align_to_mixing(const IcaResult& result,
                                        const Eigen::Matrix3d& reference_mixing);

/// A named exogenous series.
struct FactorSeries {
  std::string name;
  std::vector<Date> dates;
  std::vector<double> values;
};

/// Reads "date,<factor>,<factor>..." CSV. Empty cells are skipped.
[[nodiscard]] std::vector<FactorSeries> read_factors(const std::filesystem::path& path);

struct CorrelationRow {
  int component = 0;
  std::string factor;
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

struct FactorCorrelationTable {
  std::vector<CorrelationRow> rows;
  /// Index into `rows` of the max-|r| factor for each component.
  std::array<std::size_t, 3> top{};

  [[nodiscard]] const CorrelationRow& top_row(int component) const {
    return rows[top[static_cast<std::size_t>(component)]];
  }
};

inline constexpr std::size_t kMinOverlap = 30;

/// Pearson r and two-sided t-approximation p-value per (component, factor),
/// computed over the dates present in both series.
/// Throws Error("ica", "InsufficientOverlap") below 30 shared observations.
[[nodiscard]] FactorCorrelationTable interpret(const std::vector<Date>& dates,
                                               const Eigen::MatrixXd& components,
                                               const std::vector<FactorSeries>& factors);

struct StabilityOptions {
  int window = 252;
  int step = 21;
  FastIcaOptions ica;
};

struct StabilityWindow {
  Date start{};
  Date end{};
  /// Mixing after alignment to the previous window, columns scaled to unit norm.
  Eigen::Matrix3d mixing = Eigen::Matrix3d::Identity();
  bool converged = false;
  int iterations = 0;
  /// ||A(k) - A(k-1)||_F of the normalized mixings; absent for the first window.
  std::optional<double> drift;
  std::optional<CorrelationRow> top_factor_ic1;
};

struct StabilityTrace {
  std::vector<StabilityWindow> windows;

  [[nodiscard]] std::vector<double> drifts() const;
};

/// Rolling whiten -> fastica -> align-to-previous over windows starting every
/// `step` rows. Requires T >= window + step. Non-converged windows are
/// recorded, not fatal.
[[nodiscard]] StabilityTrace rolling_stability(const panel::FlowMatrix& flows,
                                               const StabilityOptions& options = {},
                                               const std::vector<FactorSeries>& factors = {});

}  // namespace flowlab::ica
