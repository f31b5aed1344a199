#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numbers>
#include <vector>

#include "backflow/numeric.hpp"

using namespace backflow;

TEST(Sinc, MatchesDirectQuotientAwayFromZero) {
  for (double z : {1e-3, 0.1, 1.0, -2.5, 40.0}) EXPECT_NEAR(sinc(z), std::sin(z) / z, 1e-16);
}

TEST(Sinc, TaylorBranchIsAccurateNearZero) {
  EXPECT_EQ(sinc(0.0), 1.0);
  // sin z / z = 1 - z^2/6 + z^4/120 - z^6/5040
  for (double z : {1e-9, 3e-5, 9.9e-5}) {
    const double series = 1.0 - z * z / 6.0 + std::pow(z, 4) / 120.0;
    EXPECT_NEAR(sinc(z), series, 1e-17);
  }
}

TEST(CompensatedSum, RecoversCancelledLowOrderBits) {
  CompensatedSum s;
  s += 1.0;
  for (int i = 0; i < 1000; ++i) s += 1e-16;
  s += -1.0;
  EXPECT_NEAR(s.value(), 1e-13, 1e-20);  // a plain sum returns 0
}

TEST(GaussLegendre, IntegratesPolynomialsOfDegree2nMinus1Exactly) {
  const int n = 7;
  const auto rule = gauss_legendre(n, -1.0, 2.0);
  for (int degree = 0; degree <= 2 * n - 1; ++degree) {
    double q = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) q += rule.weights[i] * std::pow(rule.nodes[i], degree);
    const double exact = (std::pow(2.0, degree + 1) - std::pow(-1.0, degree + 1)) / (degree + 1);
    EXPECT_NEAR(q, exact, 1e-12 * std::max(1.0, std::abs(exact))) << "degree " << degree;
  }
}

TEST(GaussLegendre, NodesAreSortedInsideTheInterval) {
  const auto rule = gauss_legendre(200, 0.0, 5.0);
  ASSERT_EQ(rule.nodes.size(), 200u);
  double total = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    EXPECT_GT(rule.nodes[i], 0.0);
    EXPECT_LT(rule.nodes[i], 5.0);
    if (i) EXPECT_LT(rule.nodes[i - 1], rule.nodes[i]);
    total += rule.weights[i];
  }
  EXPECT_NEAR(total, 5.0, 1e-13);
}

TEST(AdaptiveSimpson, OscillatoryIntegralAgainstClosedForm) {
  // integral_0^20 sin(3x) e^{-x/4} dx = (3 - e^{-5}(3 cos 60 + sin(60)/4)) / (9 + 1/16)
  auto f = [](double x) { return std::sin(3.0 * x) * std::exp(-x / 4.0); };
  const double exact =
      (3.0 - std::exp(-5.0) * (3.0 * std::cos(60.0) + 0.25 * std::sin(60.0))) / (9.0 + 1.0 / 16.0);
  EXPECT_NEAR(adaptive_simpson(f, 0.0, 20.0, 1e-11), exact, 1e-10);
}

TEST(AdaptiveSimpson, ReversedBoundsFlipSign) {
  auto f = [](double x) { return x * x; };
  EXPECT_NEAR(adaptive_simpson(f, 1.0, 0.0, 1e-12), -1.0 / 3.0, 1e-12);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1001);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, ResolvesThreadCount) {
  EXPECT_GE(resolve_thread_count(0), 1);
  EXPECT_EQ(resolve_thread_count(3), 3);
}
