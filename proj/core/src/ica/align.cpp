#include <algorithm>

#include "flowlab/error.hpp"
#include "flowlab/ica.hpp"
#include "flowlab/stats.hpp"

namespace flowlab::ica {

Alignment best_alignment(const Eigen::Matrix3d& similarity) {
  std::array<int, 3> perm{0, 1, 2};
  Alignment best;
  best.score = -1.0;
  do {
    double score = 0.0;
    for (int j = 0; j < 3; ++j) score += std::abs(similarity(perm[j], j));
    if (score > best.score) {
      best.score = score;
      best.perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (int j = 0; j < 3; ++j) best.sign[j] = similarity(best.perm[j], j) < 0.0 ? -1.0 : 1.0;
  return best;
}

IcaResult apply_alignment(const IcaResult& result, const Alignment& a) {
  IcaResult out = result;
  for (int j = 0; j < 3; ++j) {
    const int src = a.perm[j];
    const double s = a.sign[j];
    out.mixing.col(j) = s * result.mixing.col(src);
    out.unmixing.row(j) = s * result.unmixing.row(src);
    out.rotation.row(j) = s * result.rotation.row(src);
    if (result.components.cols() == 3) out.components.col(j) = s * result.components.col(src);
  }
  return out;
}

IcaResult align_components(const IcaResult& result, const Eigen::MatrixXd& reference_series) {
  if (reference_series.cols() != 3 || reference_series.rows() != result.components.rows()) {
    throw PreconditionError("ica", "reference series must be T x 3 matching the components");
  }
  const auto T = static_cast<std::size_t>(reference_series.rows());
  Eigen::Matrix3d sim;
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd comp = result.components.col(i);
    for (int j = 0; j < 3; ++j) {
      const Eigen::VectorXd ref = reference_series.col(j);
      sim(i, j) = stats::pearson({comp.data(), T}, {ref.data(), T}).value_or(0.0);
    }
  }
  return apply_alignment(result, best_alignment(sim));
}

IcaResult align_to_mixing(const IcaResult& result, const Eigen::Matrix3d& reference_mixing) {
  Eigen::Matrix3d sim;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double denom = result.mixing.col(i).norm() * reference_mixing.col(j).norm();
      sim(i, j) = denom > 0.0 ? result.mixing.col(i).dot(reference_mixing.col(j)) / denom : 0.0;
    }
  }
  return apply_alignment(result, best_alignment(sim));
}

}  // namespace flowlab::ica

namespace flowlab::ica {

IcaResult canonical_order(const IcaResult& result) {
  Alignment a;
  std::array<double, 3> norms{};
  for (int j = 0; j < 3; ++j) norms[static_cast<std::size_t>(j)] = result.mixing.col(j).norm();
  std::stable_sort(a.perm.begin(), a.perm.end(), [&](int x, int y) {
    return norms[static_cast<std::size_t>(x)] > norms[static_cast<std::size_t>(y)];
  });
  for (int j = 0; j < 3; ++j) {
    const auto col = result.mixing.col(a.perm[static_cast<std::size_t>(j)]);
    double total = col.sum();
    if (total == 0.0) {
      Eigen::Index k = 0;
      col.cwiseAbs().maxCoeff(&k);
      total = col(k);
    }
    a.sign[static_cast<std::size_t>(j)] = total < 0.0 ? -1.0 : 1.0;
  }
  return apply_alignment(result, a);
}

}  // namespace flowlab::ica
