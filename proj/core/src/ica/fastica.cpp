#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/ica.hpp"
#include "flowlab/rng.hpp"

namespace flowlab::ica {

namespace {

// W <- (W W^T)^(-1/2) W
Eigen::Matrix3d symmetric_decorrelation(const Eigen::Matrix3d& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(w * w.transpose());
  const Eigen::Vector3d inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * w;
}

Eigen::Matrix3d random_orthogonal(std::uint64_t seed) {
  Rng rng(seed);
  Eigen::Matrix3d g;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) g(i, j) = rng.normal();
  }
  return symmetric_decorrelation(g);
}

}  // namespace

IcaResult fastica(const Whitened& whitened, const FastIcaOptions& options) {
  const Eigen::MatrixXd& z = whitened.data;
  if (z.cols() != 3 || z.rows() < kMinObservations) {
    throw PreconditionError("ica", "fastica expects whitened T x 3 data with T >= 30");
  }
  if (options.max_iter < 1 || !(options.tol > 0.0)) {
    throw PreconditionError("ica", "fastica needs max_iter >= 1 and tol > 0");
  }
  const double inv_t = 1.0 / static_cast<double>(z.rows());

  Eigen::Matrix3d w = random_orthogonal(options.seed);
  IcaResult result;
  Eigen::MatrixXd y(z.rows(), 3);
  for (int it = 1; it <= options.max_iter; ++it) {
    y.noalias() = z * w.transpose();
    Eigen::Vector3d mean_derivative = Eigen::Vector3d::Zero();
    for (Eigen::Index c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (Eigen::Index t = 0; t < y.rows(); ++t) {
        const double g = std::tanh(y(t, c));
        y(t, c) = g;
        acc += 1.0 - g * g;
      }
      mean_derivative(c) = acc * inv_t;
    }
    Eigen::Matrix3d w_new = (y.transpose() * z) * inv_t - mean_derivative.asDiagonal() * w;
    w_new = symmetric_decorrelation(w_new);

    const double lim = (1.0 - (w_new * w.transpose()).diagonal().cwiseAbs().array()).abs().maxCoeff();
    w = w_new;
    result.iterations = it;
    if (lim < options.tol) {
      result.converged = true;
      break;
    }
  }

  const auto& tf = whitened.transform;
  result.rotation = w;
  result.unmixing = w * tf.matrix;
  result.mixing = tf.dewhitening() * w.transpose();
  result.mean = tf.mean;
  result.components = z * w.transpose();
  return canonical_order(result);
}

IcaResult run_ica(const Eigen::MatrixXd& observations, const FastIcaOptions& options) {
  return fastica(whiten(observations), options);
}

void require_converged(const IcaResult& result) {
  if (!result.converged) {
    throw Error("ica", "NotConverged", fmt::format("no convergence after {} iterations", result.iterations));
  }
}

Eigen::MatrixXd reconstruct(const IcaResult& result) {
  return (result.components * result.mixing.transpose()).rowwise() + result.mean.transpose();
}

}  // namespace flowlab::ica
