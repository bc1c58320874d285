#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "flowlab/csv.hpp"
#include "flowlab/error.hpp"
#include "flowlab/flows.hpp"
#include "flowlab/stats.hpp"
#include "flowlab/synth.hpp"

using namespace flowlab;

namespace {

std::vector<double> daily_returns(std::span<const panel::PanelRecord> history) {
  std::vector<double> r;
  for (std::size_t t = 1; t < history.size(); ++t) r.push_back(history[t].close / history[t - 1].close - 1.0);
  return r;
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  return {m.col(c).data(), m.col(c).data() + m.rows()};
}

}  // namespace

TEST(Synth, ZeroCoefficientReturnsMatchTargetMoments) {
  synth::SynthConfig cfg;
  cfg.n_stocks = 1;
  cfg.n_days = 20000;
  cfg.seed = 2024;
  const auto sp = synth::generate(cfg);
  const auto r = daily_returns(sp.panel.history(std::size_t{0}));
  const double n = static_cast<double>(r.size());
  const double se_mean = cfg.return_noise_sigma / std::sqrt(n);
  const double se_sd = cfg.return_noise_sigma / std::sqrt(2.0 * n);
  EXPECT_NEAR(stats::mean(r), 0.00028, 3.0 * se_mean);
  EXPECT_NEAR(stats::sample_sd(r), 0.0349, 3.0 * se_sd);
}

TEST(Synth, IdentityMixingMakesFlowsEqualSources) {
  synth::SynthConfig cfg;
  cfg.n_stocks = 12;
  cfg.n_days = 300;
  cfg.mixing = Eigen::Matrix3d::Identity();
  const auto sp = synth::generate(cfg);
  const auto fm = panel::aggregate_market_flows(sp.panel, {panel::FlowNormalizer::MatchedFilter});
  ASSERT_EQ(fm.rows(), static_cast<std::size_t>(cfg.n_days));
  const Eigen::MatrixXd x = fm.values / cfg.flow_intensity;
  EXPECT_LT((x - sp.true_sources).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Synth, SameSeedIsBitIdentical) {
  synth::SynthConfig cfg;
  cfg.n_stocks = 8;
  cfg.n_days = 120;
  cfg.flow_to_return_coeff = 0.01;
  cfg.seed = 99;
  const auto a = synth::generate(cfg);
  const auto b = synth::generate(cfg);
  EXPECT_EQ(a.panel, b.panel);
  EXPECT_EQ(a.true_sources, b.true_sources);
  EXPECT_EQ(a.dates, b.dates);
  cfg.seed = 100;
  EXPECT_FALSE(synth::generate(cfg).panel == a.panel);
}

TEST(Synth, PanelSatisfiesRecordInvariants) {
  synth::SynthConfig cfg;
  cfg.n_stocks = 20;
  cfg.n_days = 250;
  cfg.flow_to_return_coeff = 0.02;
  const auto sp = synth::generate(cfg);
  for (const auto& r : sp.panel.records()) EXPECT_FALSE(panel::record_violation(r).has_value()) << r.ticker;
  EXPECT_EQ(static_cast<std::size_t>(sp.true_sources.rows()), sp.panel.calendar().size());
  EXPECT_EQ(sp.panel.universe().size(), 20u);
  EXPECT_EQ(sp.true_mixing, cfg.mixing);
}

TEST(Synth, FlowCovarianceConvergesToMixedSourceCovariance) {
  synth::SynthConfig cfg;
  cfg.n_stocks = 4;
  cfg.n_days = 10000;
  const auto sp = synth::generate(cfg);
  const auto fm = panel::aggregate_market_flows(sp.panel, {panel::FlowNormalizer::MatchedFilter});
  const Eigen::MatrixXd x = fm.values / cfg.flow_intensity;
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::Matrix3d sample_cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  // Sources have unit variance by construction, so Cov(S) = I.
  const Eigen::Matrix3d expected = cfg.mixing * cfg.mixing.transpose();
  EXPECT_LT((sample_cov - expected).norm() / expected.norm(), 0.05);
}

TEST(Synth, SourceKurtosisSignMatchesKind) {
  synth::SynthConfig cfg;
  cfg.n_stocks = 1;
  cfg.n_days = 5000;
  cfg.source_kind = {synth::SourceKind::Laplacian, synth::SourceKind::Uniform, synth::SourceKind::Sinusoid};
  const auto sp = synth::generate(cfg);
  EXPECT_GT(stats::excess_kurtosis(column(sp.true_sources, 0)), 0.0);
  EXPECT_LT(stats::excess_kurtosis(column(sp.true_sources, 1)), 0.0);
  EXPECT_LT(stats::excess_kurtosis(column(sp.true_sources, 2)), 0.0);
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_NEAR(stats::sample_sd(column(sp.true_sources, k)), 1.0, 0.05);
}

TEST(Synth, SingularMixingIsRejected) {
  synth::SynthConfig cfg;
  cfg.mixing << 1, 2, 3, 2, 4, 6, 0, 1, 1;
  try {
    (void)synth::generate(cfg);
    FAIL() << "expected SingularMixing";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "SingularMixing");
  }
}

TEST(Synth, InvalidConfigIsRejected) {
  synth::SynthConfig cfg;
  cfg.n_days = 1;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg = {};
  cfg.n_stocks = 0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
  cfg = {};
  cfg.return_noise_sigma = 0.0;
  EXPECT_THROW(cfg.validate(), PreconditionError);
}

TEST(Synth, RegimeBreakSwitchesMixing) {
  synth::SynthConfig cfg;
  cfg.n_stocks = 3;
  cfg.n_days = 100;
  cfg.mixing = Eigen::Matrix3d::Identity();
  cfg.regime_break_day = 50;
  cfg.mixing_after_break = Eigen::Vector3d(-1, 1, 1).asDiagonal();
  const auto sp = synth::generate(cfg);
  const auto fm = panel::aggregate_market_flows(sp.panel, {panel::FlowNormalizer::MatchedFilter});
  const Eigen::MatrixXd x = fm.values / cfg.flow_intensity;
  EXPECT_NEAR(x(10, 0), sp.true_sources(10, 0), 1e-9);
  EXPECT_NEAR(x(60, 0), -sp.true_sources(60, 0), 1e-9);
  EXPECT_NEAR(x(60, 1), sp.true_sources(60, 1), 1e-9);
}

TEST(Synth, TruthFileHasDateAndThreeSources) {
  synth::SynthConfig cfg;
  cfg.n_stocks = 2;
  cfg.n_days = 10;
  const auto sp = synth::generate(cfg);
  const auto path = std::filesystem::temp_directory_path() / "flowlab_test_truth.csv";
  synth::write_truth(sp, path);
  const auto table = csv::read(path);
  ASSERT_EQ(table.header, (std::vector<std::string>{"date", "s1", "s2", "s3"}));
  ASSERT_EQ(table.rows.size(), 10u);
  EXPECT_EQ(*csv::parse_double(table.rows[3][2]), sp.true_sources(3, 1));
  std::filesystem::remove(path);
}
