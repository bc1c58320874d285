#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "flowlab/error.hpp"
#include "flowlab/filters.hpp"
#include "flowlab/rng.hpp"

using namespace flowlab;
using filters::matched_filter;

namespace {

std::string error_kind(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return "none";
}

// Reference moments in extended precision.
std::pair<double, double> oracle_moments(const std::vector<double>& x) {
  long double s = 0.0L;
  for (double v : x) s += v;
  const long double m = s / static_cast<long double>(x.size());
  long double ss = 0.0L;
  for (double v : x) ss += (v - m) * (v - m);
  return {static_cast<double>(m), static_cast<double>(std::sqrt(ss / static_cast<long double>(x.size() - 1)))};
}

}  // namespace

TEST(MatchedFilter, Examples) {
  EXPECT_EQ(matched_filter(10e9, 50e9), 0.2);
  EXPECT_DOUBLE_EQ(matched_filter(10e9, 50e12), 0.0002);
  EXPECT_EQ(matched_filter(0.0, 123.0), 0.0);
  EXPECT_EQ(matched_filter(-10e9, 50e9), -0.2);
}

TEST(MatchedFilter, NonpositiveCapIsAnError) {
  EXPECT_EQ(error_kind([] { (void)matched_filter(1.0, 0.0); }), "NonpositiveMarketCap");
  EXPECT_EQ(error_kind([] { (void)matched_filter(1.0, -5.0); }), "NonpositiveMarketCap");
}

TEST(MatchedFilter, ScaleInvariance) {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double nb = rng.normal(0.0, 1e9);
    const double mc = std::exp(rng.normal(25.0, 2.0));
    const double k = std::exp(rng.normal(0.0, 3.0));
    EXPECT_NEAR(matched_filter(k * nb, k * mc), matched_filter(nb, mc), 1e-15 * std::abs(matched_filter(nb, mc)) + 1e-300);
  }
}

TEST(MatchedFilter, LinearInNetBuy) {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.normal(0.0, 1e9);
    const double b = rng.normal(0.0, 1e9);
    const double c = rng.normal();
    const double mc = std::exp(rng.normal(25.0, 2.0));
    const double lhs = matched_filter(c * a + b, mc);
    const double rhs = c * matched_filter(a, mc) + matched_filter(b, mc);
    EXPECT_NEAR(lhs, rhs, 1e-14 * (std::abs(c * a) + std::abs(b)) / mc);
  }
}

TEST(Zscore, ConstantSeriesHasNoDefinedEntries) {
  const std::vector<double> x(30, 4.2);
  for (const auto& v : filters::zscore_normalize(x, 5)) EXPECT_FALSE(v.has_value());
}

TEST(Zscore, HandComputedThreePointExample) {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const auto z = filters::zscore_normalize(x, 2);
  ASSERT_EQ(z.size(), 3u);
  EXPECT_FALSE(z[0].has_value());
  EXPECT_FALSE(z[1].has_value());
  ASSERT_TRUE(z[2].has_value());
  // mean(1, 2) = 1.5, sample sd(1, 2) = sqrt(0.5)
  EXPECT_NEAR(*z[2], 1.5 / std::sqrt(0.5), 1e-14);
}

TEST(Zscore, AffineInvariance) {
  Rng rng(3);
  std::vector<double> x(120);
  for (auto& v : x) v = rng.laplace(1.0);
  const double a = 3.7;
  const double b = -12.5;
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = a * x[i] + b;
  const auto zx = filters::zscore_normalize(x, 20);
  const auto zy = filters::zscore_normalize(y, 20);
  ASSERT_EQ(zx.size(), zy.size());
  for (std::size_t i = 0; i < zx.size(); ++i) {
    ASSERT_EQ(zx[i].has_value(), zy[i].has_value()) << i;
    if (zx[i]) {
      EXPECT_NEAR(*zx[i], *zy[i], 1e-10) << i;
    }
  }
}

TEST(Zscore, EntriesUseOnlyPastValues) {
  std::vector<double> x{1, 5, 2, 8, 3, 9};
  const auto before = filters::zscore_normalize(x, 3);
  x.back() = 1000.0;
  const auto after = filters::zscore_normalize(x, 3);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) EXPECT_EQ(before[i], after[i]);
}

TEST(Zscore, WindowTooShort) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_EQ(error_kind([&] { (void)filters::zscore_normalize(x, 1); }), "WindowTooShort");
}

TEST(Winsorize, SeriesWithinBoundsIsUnchanged) {
  Rng rng(11);
  std::vector<double> x(500);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  EXPECT_EQ(filters::winsorize(x, 5.0), x);
}

TEST(Winsorize, TenSigmaOutlierIsClampedToFiveSigma) {
  // 99 points at +-1 (sd ~ 1) and one point at 10.
  std::vector<double> x;
  for (int i = 0; i < 99; ++i) x.push_back(i % 2 == 0 ? 1.0 : -1.0);
  x.push_back(10.0);
  const auto [m, sd] = oracle_moments(x);
  ASSERT_GT(10.0, m + 5.0 * sd);
  const auto w = filters::winsorize(x, 5.0);
  EXPECT_NEAR(w.back(), m + 5.0 * sd, 1e-12);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) EXPECT_EQ(w[i], x[i]);
}

TEST(Winsorize, FrozenMomentsAreIdempotent) {
  Rng rng(5);
  std::vector<double> x(300);
  for (auto& v : x) v = rng.laplace(1.0);
  x[17] = 40.0;
  x[200] = -35.0;
  const auto m = filters::moments(x);
  const auto once = filters::winsorize(x, 3.0, m);
  EXPECT_EQ(filters::winsorize(once, 3.0, m), once);
}

TEST(Winsorize, OutputInsideInputBand) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(200);
    for (auto& v : x) v = rng.laplace(0.5) * (trial + 1);
    const auto [m, sd] = oracle_moments(x);
    const double sigma = 1.0 + 0.2 * trial;
    for (double v : filters::winsorize(x, sigma)) {
      EXPECT_LE(v, m + sigma * sd + 1e-12 * sd);
      EXPECT_GE(v, m - sigma * sd - 1e-12 * sd);
    }
  }
}

TEST(Winsorize, Errors) {
  const std::vector<double> flat(10, 2.0);
  EXPECT_EQ(error_kind([&] { (void)filters::winsorize(flat, 5.0); }), "DegenerateSeries");
  const std::vector<double> x{1.0, 2.0};
  EXPECT_THROW((void)filters::winsorize(x, 0.0), PreconditionError);
  const std::vector<double> one{1.0};
  EXPECT_THROW((void)filters::winsorize(one, 5.0), PreconditionError);
}
