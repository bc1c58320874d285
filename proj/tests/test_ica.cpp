#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "flowlab/error.hpp"
#include "flowlab/ica.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/stats.hpp"
#include "oracles.hpp"

using namespace flowlab;
using flowlab::testing::amari_distance;

namespace {

Eigen::MatrixXd laplace_sources(int T, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd s(T, 3);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < 3; ++k) s(t, k) = rng.laplace(1.0 / std::sqrt(2.0));
  }
  return s;
}

Eigen::Matrix3d random_mixing(std::uint64_t seed) {
  Rng rng(seed);
  Eigen::Matrix3d a;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a(i, j) = rng.normal();
  }
  return a;
}

Eigen::MatrixXd gaussian(int T, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(T, 3);
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < 3; ++k) x(t, k) = rng.normal();
  }
  return x;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

Eigen::Matrix3d correlation(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = covariance(x);
  const Eigen::VectorXd d = c.diagonal().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * c * d.asDiagonal();
}

std::vector<double> col(const Eigen::MatrixXd& m, Eigen::Index c) {
  return {m.col(c).data(), m.col(c).data() + m.rows()};
}

std::vector<Date> day_index(std::size_t n) {
  std::vector<Date> d;
  Date day = Date{std::chrono::year{2000} / 1 / 1};
  for (std::size_t i = 0; i < n; ++i) d.push_back(day + std::chrono::days{static_cast<int>(i)});
  return d;
}

std::string error_kind(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return "none";
}

// Brute force over all 6 permutations x 8 sign patterns.
ica::Alignment brute_alignment(const Eigen::Matrix3d& sim) {
  std::array<int, 3> perm{0, 1, 2};
  ica::Alignment best;
  best.score = -1.0;
  do {
    for (int mask = 0; mask < 8; ++mask) {
      double score = 0.0;
      std::array<double, 3> sign{};
      for (int j = 0; j < 3; ++j) {
        sign[static_cast<std::size_t>(j)] = (mask >> j) & 1 ? -1.0 : 1.0;
        score += sign[static_cast<std::size_t>(j)] * sim(perm[static_cast<std::size_t>(j)], j);
      }
      if (score > best.score) {
        best.score = score;
        best.perm = perm;
        best.sign = sign;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST(Whiten, AlreadyWhiteInputGivesOrthogonalTransform) {
  // Exactly white sample: orthonormalize a centred Gaussian sample.
  Eigen::MatrixXd x = gaussian(400, 1);
  x = x.rowwise() - x.colwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(400, 3);
  q *= std::sqrt(399.0);
  ASSERT_LT((covariance(q) - Eigen::Matrix3d::Identity()).norm(), 1e-10);
  const auto w = ica::whiten(q);
  EXPECT_LT((w.transform.matrix * w.transform.matrix.transpose() - Eigen::Matrix3d::Identity()).norm(), 1e-8);
  EXPECT_LT((covariance(w.data) - Eigen::Matrix3d::Identity()).norm(), 1e-8);
}

TEST(Whiten, DiagonalCovarianceEigenvalues) {
  Eigen::MatrixXd x = gaussian(600, 2);
  // Make the sample exactly white, then scale columns by 2, 1, 0.5.
  x = x.rowwise() - x.colwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(600, 3);
  q *= std::sqrt(599.0);
  q = q * Eigen::Vector3d(0.5, 2.0, 1.0).asDiagonal();
  const auto w = ica::whiten(q);
  EXPECT_NEAR(w.transform.eigenvalues(0), 4.0, 1e-10);
  EXPECT_NEAR(w.transform.eigenvalues(1), 1.0, 1e-10);
  EXPECT_NEAR(w.transform.eigenvalues(2), 0.25, 1e-10);
  const Eigen::MatrixXd c = covariance(w.data);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(c(k, k), 1.0, 1e-8);
  EXPECT_LT(w.data.colwise().mean().norm(), 1e-12);
  EXPECT_LT((w.transform.dewhitening() * w.transform.matrix - Eigen::Matrix3d::Identity()).norm(), 1e-10);
}

TEST(Whiten, DuplicateColumnIsRankDeficient) {
  Eigen::MatrixXd x = gaussian(100, 3);
  x.col(2) = x.col(0);
  EXPECT_EQ(error_kind([&] { (void)ica::whiten(x); }), "RankDeficient");
}

TEST(Whiten, TooFewRowsIsAPreconditionViolation) {
  EXPECT_THROW((void)ica::whiten(gaussian(29, 4)), PreconditionError);
}

TEST(FastIca, RecoversLaplacianSourcesAtTwentyThousand) {
  const Eigen::MatrixXd s = laplace_sources(20000, 10);
  const Eigen::Matrix3d a = random_mixing(11);
  const Eigen::MatrixXd x = s * a.transpose();
  const auto result = ica::run_ica(x, {.seed = 5});
  EXPECT_TRUE(result.converged);
  EXPECT_LT(amari_distance(a, result.mixing), 0.05);
  const auto aligned = ica::align_components(result, s);
  for (int k = 0; k < 3; ++k) {
    EXPECT_GT(*stats::pearson(col(aligned.components, k), col(s, k)), 0.99);
  }
}

TEST(FastIca, GaussianInputDoesNotCrash) {
  const auto result = ica::run_ica(gaussian(3000, 12), {.max_iter = 50, .seed = 1});
  EXPECT_TRUE(result.mixing.allFinite());
  EXPECT_LE(result.iterations, 50);
  if (!result.converged) {
    EXPECT_EQ(error_kind([&] { ica::require_converged(result); }), "NotConverged");
  }
}

TEST(FastIca, SameSeedSameUnmixing) {
  const Eigen::MatrixXd x = laplace_sources(2000, 13) * random_mixing(14).transpose();
  const auto a = ica::run_ica(x, {.seed = 77});
  const auto b = ica::run_ica(x, {.seed = 77});
  EXPECT_EQ(a.unmixing, b.unmixing);
  EXPECT_EQ(a.components, b.components);
}

TEST(FastIca, RotationIsOrthogonal) {
  const Eigen::MatrixXd x = laplace_sources(3000, 15) * random_mixing(16).transpose();
  const auto r = ica::run_ica(x, {.seed = 3});
  EXPECT_LT((r.rotation * r.rotation.transpose() - Eigen::Matrix3d::Identity()).norm(), 1e-8);
}

TEST(FastIca, ComponentsAreUncorrelatedWithUnitVariance) {
  const Eigen::MatrixXd x = laplace_sources(5000, 17) * random_mixing(18).transpose();
  const auto r = ica::run_ica(x, {.seed = 9});
  const Eigen::Matrix3d c = correlation(r.components);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j) {
        EXPECT_LT(std::abs(c(i, j)), 1e-3);
      }
    }
  }
  const Eigen::MatrixXd cov = covariance(r.components);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(cov(k, k), 1.0, 1e-8);
}

TEST(FastIca, ReconstructionIsExact) {
  const Eigen::MatrixXd x = (laplace_sources(4000, 19) * random_mixing(20).transpose()).array() + 3.0;
  const auto r = ica::run_ica(x, {.seed = 2});
  EXPECT_LT((ica::reconstruct(r) - x).norm() / x.norm(), 1e-8);
}

TEST(FastIca, CanonicalOrderSignsAndSorts) {
  const Eigen::MatrixXd x = laplace_sources(3000, 21) * random_mixing(22).transpose();
  const auto r = ica::run_ica(x, {.seed = 4});
  for (int j = 0; j < 3; ++j) EXPECT_GE(r.mixing.col(j).sum(), 0.0);
  EXPECT_GE(r.mixing.col(0).norm(), r.mixing.col(1).norm());
  EXPECT_GE(r.mixing.col(1).norm(), r.mixing.col(2).norm());
}

TEST(Align, MatchesBruteForceOverSignedPermutations) {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Matrix3d sim;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) sim(i, j) = rng.uniform(-1.0, 1.0);
    }
    const auto got = ica::best_alignment(sim);
    const auto want = brute_alignment(sim);
    EXPECT_NEAR(got.score, want.score, 1e-12);
    EXPECT_EQ(got.perm, want.perm);
    EXPECT_EQ(got.sign, want.sign);
  }
}

TEST(Align, SignedShuffleIsUndone) {
  const Eigen::MatrixXd s = laplace_sources(2000, 24);
  const Eigen::MatrixXd x = s * random_mixing(25).transpose();
  const auto base = ica::align_components(ica::run_ica(x, {.seed = 1}), s);
  std::array<int, 3> perm{0, 1, 2};
  do {
    for (int mask = 0; mask < 8; ++mask) {
      ica::Alignment shuffle;
      shuffle.perm = perm;
      for (int j = 0; j < 3; ++j) shuffle.sign[static_cast<std::size_t>(j)] = (mask >> j) & 1 ? -1.0 : 1.0;
      const auto shuffled = ica::apply_alignment(base, shuffle);
      const auto restored = ica::align_components(shuffled, base.components);
      EXPECT_LT((restored.components - base.components).norm(), 1e-9);
      EXPECT_LT((restored.mixing - base.mixing).norm(), 1e-9);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST(Align, NegatedSourceTwoIsSwappedAndFlipped) {
  const Eigen::MatrixXd s = laplace_sources(500, 26);
  ica::IcaResult r;
  r.components.resize(500, 3);
  r.components.col(0) = -s.col(1);
  r.components.col(1) = s.col(0);
  r.components.col(2) = s.col(2);
  const auto aligned = ica::align_components(r, s);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(*stats::pearson(col(aligned.components, k), col(s, k)), 1.0, 1e-12);
  }
}

TEST(Align, AlreadyAlignedIsUnchanged) {
  const Eigen::MatrixXd s = laplace_sources(500, 27);
  ica::IcaResult r;
  r.components = s;
  r.mixing = random_mixing(28);
  const auto aligned = ica::align_components(r, s);
  EXPECT_EQ(aligned.components, r.components);
  EXPECT_EQ(aligned.mixing, r.mixing);
}

TEST(Align, AmariBelowPointOneAcrossSeeds) {
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd s = laplace_sources(20000, 100 + seed);
    const Eigen::Matrix3d a = random_mixing(200 + seed);
    const auto r = ica::align_components(ica::run_ica(s * a.transpose(), {.seed = seed}), s);
    if (amari_distance(a, r.mixing) < 0.1) ++passes;
  }
  EXPECT_GE(passes, 9);
}

TEST(Interpret, ComponentEqualToFactorIsTop) {
  const Eigen::MatrixXd s = laplace_sources(300, 29);
  const auto dates = day_index(300);
  Rng rng(30);
  std::vector<double> noise(300);
  for (auto& v : noise) v = rng.normal();
  const std::vector<ica::FactorSeries> factors{{"noise", dates, noise}, {"src2", dates, col(s, 1)}};
  const auto table = ica::interpret(dates, s, factors);
  EXPECT_EQ(table.top_row(1).factor, "src2");
  EXPECT_NEAR(table.top_row(1).r, 1.0, 1e-12);
  for (const auto& row : table.rows) {
    EXPECT_LE(std::abs(row.r), 1.0);
    EXPECT_GE(row.p_value, 0.0);
    EXPECT_LE(row.p_value, 1.0);
  }
}

TEST(Interpret, OrthogonalizedComponentHasNearZeroCorrelation) {
  const int T = 1000;
  const auto dates = day_index(T);
  const Eigen::MatrixXd f = gaussian(T, 31);
  Eigen::MatrixXd comps = laplace_sources(T, 32);
  // Gram-Schmidt each component against the centred factors (and a constant).
  Eigen::MatrixXd basis(T, 4);
  basis.col(0).setOnes();
  basis.rightCols(3) = f;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(T, 4);
  comps = comps - q * (q.transpose() * comps);
  const std::vector<ica::FactorSeries> factors{
      {"f1", dates, col(f, 0)}, {"f2", dates, col(f, 1)}, {"f3", dates, col(f, 2)}};
  const auto table = ica::interpret(dates, comps, factors);
  for (const auto& row : table.rows) EXPECT_LT(std::abs(row.r), 2.0 / std::sqrt(static_cast<double>(T)));
}

TEST(Interpret, PlantedCorrelationIsRecoveredThroughIca) {
  const int T = 5000;
  const double rho = 0.37;
  const Eigen::MatrixXd s = laplace_sources(T, 33);
  const Eigen::Matrix3d a = random_mixing(34);
  Rng rng(35);
  std::vector<double> market(T);
  for (int t = 0; t < T; ++t) market[static_cast<std::size_t>(t)] = rho * s(t, 0) + std::sqrt(1 - rho * rho) * rng.normal();
  const auto dates = day_index(T);
  const auto r = ica::align_components(ica::run_ica(s * a.transpose(), {.seed = 6}), s);
  const auto table = ica::interpret(dates, r.components, {{"market_return", dates, market}});
  EXPECT_NEAR(table.top_row(0).r, rho, 0.02);
  EXPECT_LT(table.top_row(0).p_value, 1e-10);
}

TEST(Interpret, InvariantToPositiveRescaling) {
  const Eigen::MatrixXd s = laplace_sources(200, 36);
  const auto dates = day_index(200);
  std::vector<double> f = col(gaussian(200, 37), 0);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += 0.5 * s(static_cast<Eigen::Index>(i), 2);
  const auto base = ica::interpret(dates, s, {{"f", dates, f}});
  std::vector<double> g = f;
  for (auto& v : g) v = 250.0 * v + 3.0;
  const auto scaled = ica::interpret(dates, 0.01 * s, {{"f", dates, g}});
  for (std::size_t i = 0; i < base.rows.size(); ++i) EXPECT_NEAR(base.rows[i].r, scaled.rows[i].r, 1e-12);
}

TEST(Interpret, InsufficientOverlap) {
  const auto dates = day_index(100);
  const std::vector<Date> late(dates.begin() + 80, dates.end());
  const std::vector<double> v(20, 1.0);
  EXPECT_EQ(error_kind([&] { (void)ica::interpret(dates, laplace_sources(100, 38), {{"f", late, v}}); }),
            "InsufficientOverlap");
}

TEST(Stability, StationaryDataHasSmallDriftAndStableTopFactor) {
  const int T = 1260;
  const Eigen::MatrixXd s = laplace_sources(T, 39);
  panel::FlowMatrix fm;
  fm.dates = day_index(T);
  fm.values = s * random_mixing(40).transpose();
  const std::vector<ica::FactorSeries> factors{
      {"s1", fm.dates, col(s, 0)}, {"s2", fm.dates, col(s, 1)}, {"s3", fm.dates, col(s, 2)}};
  const auto trace = ica::rolling_stability(fm, {}, factors);
  auto drifts = trace.drifts();
  ASSERT_FALSE(drifts.empty());
  for (double d : drifts) EXPECT_GE(d, 0.0);
  EXPECT_LT(stats::quantile(drifts, 0.5), 0.5);
  EXPECT_FALSE(trace.windows.front().drift.has_value());
  const std::string first = trace.windows.front().top_factor_ic1->factor;
  for (const auto& w : trace.windows) EXPECT_EQ(w.top_factor_ic1->factor, first);
}

TEST(Stability, RowFlipAtMidpointSpikesDrift) {
  const int T = 2520;
  const Eigen::MatrixXd s = laplace_sources(T, 41);
  const Eigen::Matrix3d a = random_mixing(42);
  const Eigen::Matrix3d flipped = Eigen::Vector3d(-1, 1, 1).asDiagonal() * a;
  panel::FlowMatrix fm;
  fm.dates = day_index(T);
  fm.values.resize(T, 3);
  fm.values.topRows(T / 2) = s.topRows(T / 2) * a.transpose();
  fm.values.bottomRows(T - T / 2) = s.bottomRows(T - T / 2) * flipped.transpose();
  const ica::StabilityOptions opts;
  const auto trace = ica::rolling_stability(fm, opts);
  double straddle = 0.0;
  std::vector<double> other;
  for (std::size_t k = 1; k < trace.windows.size(); ++k) {
    const long start = static_cast<long>(k) * opts.step;
    const bool crosses = start < T / 2 && start + opts.window > T / 2;
    const bool prev_crosses = start - opts.step < T / 2 && start - opts.step + opts.window > T / 2;
    if (crosses || prev_crosses) {
      straddle = std::max(straddle, *trace.windows[k].drift);
    } else {
      other.push_back(*trace.windows[k].drift);
    }
  }
  EXPECT_GT(straddle, 3.0 * stats::quantile(other, 0.5));
}

TEST(Stability, WindowLongerThanSeriesIsRejected) {
  panel::FlowMatrix fm;
  fm.dates = day_index(200);
  fm.values = gaussian(200, 43);
  EXPECT_THROW((void)ica::rolling_stability(fm, {.window = 252}), PreconditionError);
}
