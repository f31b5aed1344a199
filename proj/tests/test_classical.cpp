#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "backflow/classical.hpp"

using namespace backflow;

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Andrew's monotone chain; returns the enclosed area.
double hull_area(std::vector<PhaseSpacePoint> pts) {
  std::sort(pts.begin(), pts.end(), [](auto a, auto b) { return a.x < b.x || (a.x == b.x && a.p < b.p); });
  auto cross = [](auto o, auto a, auto b) { return (a.x - o.x) * (b.p - o.p) - (a.p - o.p) * (b.x - o.x); };
  std::vector<PhaseSpacePoint> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) area += h[i].x * h[i + 1].p - h[i + 1].x * h[i].p;
  return 0.5 * std::abs(area);
}

ClassicalEnsemble points(std::vector<PhaseSpacePoint> s) {
  ClassicalEnsemble e;
  e.samples = std::move(s);
  return e;
}

GaussianPhaseSpace random_distribution(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {-3.0 + 6.0 * u(rng), -2.0 + 4.0 * u(rng), 0.3 + 2.0 * u(rng), 0.3 + 2.0 * u(rng), -0.9 + 1.8 * u(rng)};
}

}  // namespace

TEST(Philox, KnownAnswerVectors) {
  using B = Philox4x32::Block;
  EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}), (B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, StreamsDependOnlyOnSeedAndIndex) {
  const Philox4x32 a(42), b(42), c(43);
  EXPECT_EQ(a.at(1000), b.at(1000));
  EXPECT_NE(a.at(1000), c.at(1000));
  EXPECT_NE(a.at(1000), a.at(1001));
  EXPECT_NE(a.at(7, 0), a.at(7, 1));
  for (std::uint64_t i = 0; i < 1000; ++i) {
    for (double v : a.uniforms(i)) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST(Philox, NormalsHaveUnitMoments) {
  const Philox4x32 g(9);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n / 2; ++i) {
    for (double z : g.normals(i)) s1 += z, s2 += z * z, s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(GaussianPhaseSpace, SampleMomentsMatchTheDistribution) {
  const GaussianPhaseSpace g{0.5, -1.0, 1.5, 0.7, 0.6};
  const auto e = g.sample(200000, 5);
  const double n = e.samples.size();
  double mx = 0, mp = 0;
  for (const auto& s : e.samples) mx += s.x / n, mp += s.p / n;
  double vx = 0, vp = 0, cxp = 0;
  for (const auto& s : e.samples) {
    vx += (s.x - mx) * (s.x - mx) / n;
    vp += (s.p - mp) * (s.p - mp) / n;
    cxp += (s.x - mx) * (s.p - mp) / n;
  }
  EXPECT_NEAR(mx, 0.5, 4.0 * 1.5 / std::sqrt(n));
  EXPECT_NEAR(mp, -1.0, 4.0 * 0.7 / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(vx), 1.5, 0.01);
  EXPECT_NEAR(std::sqrt(vp), 0.7, 0.01);
  EXPECT_NEAR(cxp / std::sqrt(vx * vp), 0.6, 0.01);
  EXPECT_EQ(e.rng_seed, 5u);
  EXPECT_DOUBLE_EQ(e.effective_size(), n);
}

TEST(GaussianPhaseSpace, SamplesAreIdenticalForAnyThreadCount) {
  const GaussianPhaseSpace g{0.0, 1.0, 1.0, 1.0, 0.2};
  const auto one = g.sample(50001, 77, 1.0, 1);
  for (int threads : {2, 3, 8}) {
    const auto many = g.sample(50001, 77, 1.0, threads);
    ASSERT_EQ(many.samples.size(), one.samples.size());
    EXPECT_TRUE(std::equal(one.samples.begin(), one.samples.end(), many.samples.begin(),
                           [](auto a, auto b) { return a.x == b.x && a.p == b.p; }));
  }
  // A prefix of a longer run is the shorter run.
  const auto longer = g.sample(60000, 77, 1.0, 2);
  EXPECT_EQ(longer.samples[50000].x, one.samples[50000].x);
}

TEST(GaussianPhaseSpace, RejectsInvalidParameters) {
  EXPECT_THROW((GaussianPhaseSpace{0, 0, 0.0, 1.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((GaussianPhaseSpace{0, 0, 1.0, 1.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((GaussianPhaseSpace{}.sample(0, 1)), std::invalid_argument);
}

TEST(Evolution, ZeroTimeIsTheIdentityAndMomentaAreUnchanged) {
  const auto e = GaussianPhaseSpace{}.sample(1000, 3);
  const auto same = evolve_classical(e, 0.0);
  const auto later = evolve_classical(e, 2.5);
  for (std::size_t i = 0; i < e.samples.size(); ++i) {
    EXPECT_EQ(same.samples[i].x, e.samples[i].x);
    EXPECT_EQ(later.samples[i].p, e.samples[i].p);
    EXPECT_DOUBLE_EQ(later.samples[i].x, e.samples[i].x + 2.5 * e.samples[i].p);
  }
}

TEST(Evolution, PreservesPhaseSpaceArea) {
  auto e = GaussianPhaseSpace{0.0, 0.0, 1.0, 2.0, 0.3}.sample(5000, 11);
  e.mass = 0.7;
  const double before = hull_area(e.samples);
  for (double t : {0.5, 3.0, -2.0}) {
    EXPECT_NEAR(hull_area(evolve_classical(e, t).samples), before, 1e-9 * before) << t;
  }
}

TEST(ClassicalBackflow, SaturatingPointParticle) {
  const auto e = points({{5.0, -1.0}});
  const auto d = classical_delta_qb(e, TimeWindow(0.0, 10.0));
  EXPECT_DOUBLE_EQ(d.value, 0.0);
  EXPECT_DOUBLE_EQ(d.standard_error, 0.0);
}

TEST(ClassicalBackflow, NeverExceedsThreeStandardErrors) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const auto g = random_distribution(rng);
    const auto e = g.sample(100000, 1000 + trial);
    const double t1 = 3.0 * u(rng), t2 = t1 + 0.1 + 3.0 * u(rng), cut = -1.0 + 2.0 * u(rng);
    const auto d = classical_delta_qb(e, TimeWindow(t1, t2), cut);
    EXPECT_LE(d.value, 3.0 * d.standard_error) << trial;
    EXPECT_GT(d.standard_error, 0.0);
  }
}

TEST(ClassicalBackflow, MillionSampleEnsembleStaysNonPositive) {
  const auto e = GaussianPhaseSpace{-1.0, 0.3, 1.0, 1.0, -0.5}.sample(1000000, 99);
  const auto d = classical_delta_qb(e, TimeWindow(0.5, 2.0));
  EXPECT_LE(d.value, 3.0 * d.standard_error);
}

TEST(ClassicalBackflow, ProbabilitiesAgreeWithGaussianTails) {
  // Left probability of x + p t / m is a normal CDF of the combined variance.
  const GaussianPhaseSpace g{1.0, -0.5, 0.8, 1.2, 0.0};
  const double mass = 1.3, t1 = 0.4, t2 = 2.1, cut = 0.2;
  auto left = [&](double t) {
    const double mean = g.mean_x + g.mean_p * t / mass;
    const double sd = std::hypot(g.sigma_x, g.sigma_p * t / mass);
    return normal_cdf((cut - mean) / sd);
  };
  const double expected = left(t2) - left(t1) - normal_cdf(-g.mean_p / g.sigma_p);
  const auto d = classical_delta_qb(g.sample(400000, 8, mass), TimeWindow(t1, t2), cut);
  EXPECT_NEAR(d.value, expected, 4.0 * d.standard_error);
}

TEST(ClassicalBackflow, StandardErrorScalesAsInverseRootN) {
  const GaussianPhaseSpace g{0.0, 0.5, 1.0, 1.0, 0.0};
  const TimeWindow w(0.3, 1.5);
  const double small = classical_delta_qb(g.sample(50000, 1), w).standard_error;
  const double large = classical_delta_qb(g.sample(200000, 1), w).standard_error;
  EXPECT_NEAR(small / large, 2.0, 0.4);
}

TEST(ClassicalBackflow, WeightedEnsembleUsesEffectiveSize) {
  auto e = points({{-1.0, 1.0}, {1.0, 1.0}, {2.0, -1.0}, {-3.0, 0.5}});
  e.weights = {0.4, 0.3, 0.2, 0.1};
  EXPECT_NEAR(e.effective_size(), 1.0 / 0.3, 1e-14);
  // t1 = 0: left = {0, 3}; t2 = 2: x = {1, 3, 0, -2}, left = {3}; P(p < 0) = 0.2.
  const auto d = classical_delta_qb(e, TimeWindow(0.0, 2.0));
  EXPECT_NEAR(d.value, 0.1 - 0.5 - 0.2, 1e-14);
}

TEST(ClassicalBackflow, RejectsEmptyOrMalformedEnsembles) {
  EXPECT_THROW(classical_delta_qb(ClassicalEnsemble{}, TimeWindow(0.0, 1.0)), std::invalid_argument);
  auto e = points({{0.0, 1.0}, {1.0, 1.0}});
  e.weights = {0.5, 0.6};
  EXPECT_THROW(e.validate(), std::invalid_argument);
  e.weights = {1.5, -0.5};
  EXPECT_THROW(e.validate(), std::invalid_argument);
  e.weights = {1.0};
  EXPECT_THROW(e.validate(), std::invalid_argument);
}

TEST(ClassicalReentry, StaticMassInsideGivesZero) {
  const auto e = points({{-2.0, 0.0}, {-1.0, 0.0}, {-0.5, 0.0}});
  const auto d = classical_delta_re(e, TimeWindow(0.0, 1.0, 2.0), {-INFINITY, 0.0});
  EXPECT_DOUBLE_EQ(d.value, 0.0);
}

TEST(ClassicalReentry, ExitingBeamIsStrictlyNegative) {
  const auto e = points({{-1.0, 2.0}, {-0.5, 2.0}, {3.0, 2.0}, {4.0, 2.0}});
  const auto d = classical_delta_re(e, TimeWindow(0.0, 1.0, 3.0), {-INFINITY, 0.0});
  EXPECT_DOUBLE_EQ(d.value, -0.5);
}

TEST(ClassicalReentry, NeverExceedsThreeStandardErrors) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_distribution(rng);
    const auto e = g.sample(100000, 5000 + trial);
    const double t0 = u(rng), t1 = t0 + 0.1 + 2.0 * u(rng), t2 = t1 + 0.1 + 2.0 * u(rng);
    const double lo = -3.0 + 2.0 * u(rng), hi = lo + 0.5 + 3.0 * u(rng);
    const auto d = classical_delta_re(e, TimeWindow(t0, t1, t2), {lo, hi});
    EXPECT_LE(d.value, 3.0 * d.standard_error) << trial;
  }
}

TEST(ClassicalReentry, RequiresReferenceTimeAndRegion) {
  const auto e = points({{0.0, 1.0}});
  EXPECT_THROW(classical_delta_re(e, TimeWindow(0.0, 1.0), {-1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(classical_delta_re(e, TimeWindow(0.0, 1.0, 2.0), {1.0, 0.0}), std::invalid_argument);
}

TEST(Tradeoff, EqualPointsSumToMinusOne) {
  const GaussianSuperposition s({{1.0, 1.0, 1.0}, {0.6, -2.0, 0.7}});
  for (double b : {-1.0, 0.0, 2.5}) {
    EXPECT_NEAR(quantum_tradeoff(s, TimeWindow(0.2, 1.1), b, b).sum(), -1.0, 1e-8);
  }
}

TEST(Tradeoff, SumIsNeverPositive) {
  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<GaussianTerm> g;
    const int terms = 1 + trial % 3;
    for (int n = 0; n < terms; ++n) {
      g.push_back({std::polar(0.2 + u(rng), 6.283185307179586 * u(rng)), -4.0 + 8.0 * u(rng), 0.3 + 1.5 * u(rng)});
    }
    const GaussianSuperposition s(std::move(g), 0.5 + u(rng), 0.5 + u(rng));
    const double t1 = 2.0 * u(rng), t2 = t1 + 0.05 + 2.0 * u(rng);
    const double b = -2.0 + 4.0 * u(rng), f = b + 3.0 * u(rng);
    EXPECT_LE(quantum_tradeoff(s, TimeWindow(t1, t2), b, f).sum(), 1e-10) << trial;
  }
}

TEST(Tradeoff, LocalizedPacketCrossingTheGapApproachesMinusTwo) {
  // Narrow in momentum, far left at t1 and inside (b, f) at t2.
  const GaussianSuperposition s({{1.0, 10.0, 3.0}}, 1.0, 1.0);
  const auto r = quantum_tradeoff(s, TimeWindow(-1.0, 1.0), -1.0e-9, 20.0);
  EXPECT_LT(r.sum(), -1.99);
  EXPECT_GE(r.sum(), -2.0 - 1e-10);
}

TEST(EnsembleCsv, RoundTripsExactly) {
  auto e = GaussianPhaseSpace{}.sample(100, 4);
  std::ostringstream plain;
  write_ensemble_csv(plain, e);
  std::istringstream in(plain.str());
  const auto back = read_ensemble_csv(in);
  ASSERT_EQ(back.samples.size(), 100u);
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(back.samples[i].x, e.samples[i].x);
    EXPECT_EQ(back.samples[i].p, e.samples[i].p);
  }
  EXPECT_TRUE(back.weights.empty());

  e.weights.assign(100, 0.01);
  std::ostringstream weighted;
  write_ensemble_csv(weighted, e);
  std::istringstream win(weighted.str());
  const auto wback = read_ensemble_csv(win, 2.0);
  ASSERT_EQ(wback.weights.size(), 100u);
  EXPECT_EQ(wback.weights[7], 0.01);
  EXPECT_EQ(wback.mass, 2.0);
}

TEST(EnsembleCsv, RejectsRaggedRows) {
  std::istringstream in("x,p\n1,2\n3,4,0.5\n");
  EXPECT_THROW(read_ensemble_csv(in), std::invalid_argument);
}
