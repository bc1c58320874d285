#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/ica.hpp"

namespace flowlab::ica {

Eigen::Matrix3d WhiteningTransform::dewhitening() const {
  return eigenvectors * eigenvalues.cwiseSqrt().asDiagonal();
}

Whitened whiten(const Eigen::MatrixXd& observations) {
  if (observations.cols() != 3) {
    throw PreconditionError("ica", fmt::format("expected 3 columns, got {}", observations.cols()));
  }
  if (observations.rows() < kMinObservations) {
    throw PreconditionError("ica", fmt::format("whitening needs T >= {}, got {}", kMinObservations,
                                               observations.rows()));
  }
  if (!observations.allFinite()) throw PreconditionError("ica", "observations contain non-finite values");

  Whitened out;
  auto& tf = out.transform;
  tf.mean = observations.colwise().mean().transpose();
  const Eigen::MatrixXd centered = observations.rowwise() - tf.mean.transpose();
  const Eigen::Matrix3d cov =
      (centered.transpose() * centered) / static_cast<double>(observations.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (es.info() != Eigen::Success) throw Error("ica", "RankDeficient", "eigendecomposition failed");
  // Eigen returns ascending order.
  for (int k = 0; k < 3; ++k) {
    tf.eigenvalues(k) = es.eigenvalues()(2 - k);
    tf.eigenvectors.col(k) = es.eigenvectors().col(2 - k);
  }
  if (!(tf.eigenvalues(0) > 0.0) || tf.eigenvalues(2) < 1e-12 * tf.eigenvalues(0)) {
    throw Error("ica", "RankDeficient",
                fmt::format("eigenvalues ({:.3g}, {:.3g}, {:.3g})", tf.eigenvalues(0),
                            tf.eigenvalues(1), tf.eigenvalues(2)));
  }
  tf.matrix = tf.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() * tf.eigenvectors.transpose();
  out.data = centered * tf.matrix.transpose();
  return out;
}

}  // namespace flowlab::ica
