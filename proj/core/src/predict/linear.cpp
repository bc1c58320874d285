#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "flowlab/error.hpp"
#include "flowlab/predict.hpp"

namespace flowlab::predict {

namespace {

struct Standardized {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  Eigen::MatrixXd Z;
  double y_mean = 0.0;
  Eigen::VectorXd y_centered;
};

Standardized standardize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) {
    throw PreconditionError("predict", fmt::format("design has {} rows but {} targets", X.rows(), y.size()));
  }
  if (X.rows() < 2 || X.cols() < 1) throw PreconditionError("predict", "need at least 2 samples and 1 feature");
  if (!X.allFinite() || !y.allFinite()) throw PreconditionError("predict", "design matrix or targets not finite");
  const double n = static_cast<double>(X.rows());
  Standardized s;
  s.mean = X.colwise().mean().transpose();
  s.Z = X.rowwise() - s.mean.transpose();
  s.scale = (s.Z.colwise().squaredNorm().transpose() / n).cwiseSqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
  }
  s.Z = s.Z * s.scale.cwiseInverse().asDiagonal();
  s.y_mean = y.mean();
  s.y_centered = y.array() - s.y_mean;
  return s;
}

LinearModel make_model(std::string kind, double lambda, const Standardized& s, Eigen::VectorXd beta) {
  LinearModel m;
  m.kind = std::move(kind);
  m.lambda = lambda;
  m.feature_mean = s.mean;
  m.feature_scale = s.scale;
  m.coefficients = std::move(beta);
  m.intercept = s.y_mean;
  return m;
}

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace

Eigen::VectorXd LinearModel::raw_coefficients() const { return coefficients.cwiseQuotient(feature_scale); }

double LinearModel::raw_intercept() const { return intercept - raw_coefficients().dot(feature_mean); }

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& features) const {
  if (features.cols() != coefficients.size()) {
    throw PreconditionError("predict", fmt::format("model expects {} features, got {}", coefficients.size(),
                                                   features.cols()));
  }
  const Eigen::MatrixXd Z =
      (features.rowwise() - feature_mean.transpose()) * feature_scale.cwiseInverse().asDiagonal();
  return (Z * coefficients).array() + intercept;
}

LinearModel ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double lambda) {
  if (!(lambda >= 0.0)) throw PreconditionError("predict", "lambda must be >= 0");
  const auto s = standardize(features, targets);
  const auto p = s.Z.cols();
  Eigen::MatrixXd A = s.Z.transpose() * s.Z;
  A.diagonal().array() += lambda;
  const Eigen::VectorXd b = s.Z.transpose() * s.y_centered;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (lambda == 0.0 && qr.rank() < p) {
    throw Error("predict", "SingularSystem", fmt::format("X'X has rank {} < {}", qr.rank(), p));
  }
  return make_model("ridge", lambda, s, qr.solve(b));
}

double lasso_lambda_max(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets) {
  const auto s = standardize(features, targets);
  const auto n = static_cast<double>(s.Z.rows());
  // Same per-column expression as the first coordinate-descent pass, so that
  // lambda = lambda_max leaves every coefficient at exactly zero.
  double out = 0.0;
  for (Eigen::Index j = 0; j < s.Z.cols(); ++j) out = std::max(out, std::abs(s.Z.col(j).dot(s.y_centered) / n));
  return out;
}

LinearModel lasso_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, double lambda,
                      const LassoOptions& options) {
  if (!(lambda >= 0.0)) throw PreconditionError("predict", "lambda must be >= 0");
  const auto s = standardize(features, targets);
  const auto n = static_cast<double>(s.Z.rows());
  const auto p = s.Z.cols();
  Eigen::VectorXd norms = s.Z.colwise().squaredNorm().transpose() / n;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd residual = s.y_centered;
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!(norms(j) > 0.0)) continue;
      const double old = beta(j);
      const double rho = s.Z.col(j).dot(residual) / n + norms(j) * old;
      const double updated = soft_threshold(rho, lambda) / norms(j);
      if (updated != old) {
        residual -= s.Z.col(j) * (updated - old);
        beta(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    if (max_change < options.tolerance) {
      auto m = make_model("lasso", lambda, s, std::move(beta));
      m.sweeps = sweep;
      return m;
    }
  }
  throw Error("predict", "NotConverged", fmt::format("coordinate descent exceeded {} sweeps", options.max_sweeps));
}

LinearModel select_lambda(const std::string& kind, std::span<const double> grid,
                          const std::vector<SequenceSample>& train,
                          const std::vector<SequenceSample>& validation) {
  if (grid.empty()) throw PreconditionError("predict", "lambda grid is empty");
  if (kind != "ridge" && kind != "lasso") throw PreconditionError("predict", "kind must be ridge or lasso");
  const auto X = flatten_features(train);
  const auto y = targets_of(train);
  const auto Xv = flatten_features(validation);
  const auto yv = targets_of(validation);
  LinearModel best;
  double best_mse = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    auto m = kind == "ridge" ? ridge_fit(X, y, lambda) : lasso_fit(X, y, lambda);
    const double mse = validation.empty() ? 0.0 : (m.predict(Xv) - yv).squaredNorm() / static_cast<double>(yv.size());
    if (mse < best_mse) {
      best_mse = mse;
      best = std::move(m);
    }
  }
  return best;
}

}  // namespace flowlab::predict
