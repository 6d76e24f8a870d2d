#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "dyad/analysis.hpp"
#include "oracles.hpp"

using namespace dyad;
using namespace dyad::analysis;

namespace {

std::vector<double> sine(std::size_t n) {
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = std::sin(0.1 * static_cast<double>(i));
  return s;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> s(n);
  for (auto& x : s) x = u(gen);
  return s;
}

experiments::TrialTrace pair_trace(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                                   const std::vector<double>& heading) {
  experiments::TrialTrace t;
  t.agents.resize(2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    experiments::StepRecord r;
    r.center = a[i];
    r.heading = heading[i];
    r.neural = {0.25, 0.5, 0.75};
    t.agents[0].steps.push_back(r);
    r.center = b[i];
    t.agents[1].steps.push_back(r);
  }
  return t;
}

}  // namespace

TEST(SampEn, ConstantSeries) {
  const std::vector<double> s(50, 3.0);
  const auto e = sample_entropy_relative(s);
  EXPECT_FALSE(e.degenerate);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_GT(e.matches_m, 0u);
  EXPECT_EQ(e.matches_m, e.matches_m_plus);
}

TEST(SampEn, MatchesBruteForce) {
  std::mt19937_64 gen(100);
  std::uniform_int_distribution<int> len(10, 150);
  std::uniform_int_distribution<int> levels(2, 12);
  for (int c = 0; c < 100; ++c) {
    // Quantized values give plenty of exact-threshold ties.
    const int q = levels(gen);
    std::uniform_int_distribution<int> v(0, q);
    std::vector<double> s(len(gen));
    for (auto& x : s) x = v(gen) / static_cast<double>(q);
    const double r = 0.2 * sample_sd(s);
    const auto got = sample_entropy(s, 2, r);
    const auto want = oracle::sampen_brute(s, 2, r);
    EXPECT_EQ(got.matches_m, want.b) << "case " << c;
    EXPECT_EQ(got.matches_m_plus, want.a) << "case " << c;
    if (std::isinf(want.value)) {
      EXPECT_TRUE(got.degenerate);
    } else {
      EXPECT_NEAR(got.value, want.value, 1e-9) << "case " << c;
    }
  }
}

TEST(SampEn, NoiseAboveSine) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    EXPECT_GT(sample_entropy_relative(noise(1000, seed)).value, sample_entropy_relative(sine(1000)).value);
  }
}

TEST(SampEn, OffsetInvariant) {
  auto s = noise(300, 4);
  const auto base = sample_entropy_relative(s);
  for (auto& x : s) x += 0.5;  // exactly representable shift of values in [-1, 1]
  const auto shifted = sample_entropy_relative(s);
  EXPECT_EQ(base.matches_m, shifted.matches_m);
  EXPECT_EQ(base.matches_m_plus, shifted.matches_m_plus);
}

TEST(SampEn, Errors) {
  const std::vector<double> tiny{1, 2, 3};
  EXPECT_THROW(sample_entropy(tiny, 2, 0.1), std::invalid_argument);
  EXPECT_THROW(sample_entropy(noise(20, 1), 0, 0.1), std::invalid_argument);
  EXPECT_THROW(sample_entropy(noise(20, 1), 2, -1), std::invalid_argument);
}

TEST(Unwrap, LinearForConstantTurn) {
  std::vector<double> wrapped;
  for (int i = 0; i < 2000; ++i) wrapped.push_back(physics::wrap_angle(0.013 * i));
  const auto u = unwrap(wrapped);
  for (int i = 0; i < 2000; ++i) EXPECT_NEAR(u[i], 0.013 * i, 1e-9);
}

TEST(Unwrap, RoundTripAndStepBounds) {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> step(-3.0, 3.0);
  std::vector<double> wrapped{1.0};
  for (int i = 0; i < 5000; ++i) wrapped.push_back(physics::wrap_angle(wrapped.back() + step(gen)));
  const auto u = unwrap(wrapped);
  for (std::size_t i = 0; i < u.size(); ++i) {
    EXPECT_NEAR(physics::wrap_angle(u[i]), wrapped[i], 1e-9);
    if (i) {
      EXPECT_GT(u[i] - u[i - 1], -std::numbers::pi);
      EXPECT_LE(u[i] - u[i - 1], std::numbers::pi);
    }
  }
  const std::vector<double> still(10, 2.0);
  EXPECT_EQ(unwrap(still), still);
}

TEST(DistanceEntropy, Examples) {
  std::vector<Vec2> a(500), b(500);
  for (std::size_t i = 0; i < 500; ++i) {
    a[i] = {0.3 * i, 1.0};
    b[i] = {0.3 * i + 15.5, 1.0};  // mid-bin, away from rounding at edges
  }
  EXPECT_EQ(distance_entropy(a, b), 0.0);

  std::vector<Vec2> c(100), d(100);
  for (std::size_t i = 0; i < 100; ++i) {
    c[i] = {0, 0};
    d[i] = {i + 0.5, 0};
  }
  EXPECT_NEAR(distance_entropy(c, d), 1.0, 1e-12);
  EXPECT_NEAR(distance_entropy(d, c), 1.0, 1e-12);
}

TEST(DistanceEntropy, TranslationAndSwapInvariant) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-40, 40);
  std::vector<Vec2> a(400), b(400), at(400), bt(400);
  for (std::size_t i = 0; i < 400; ++i) {
    a[i] = {u(gen), u(gen)};
    b[i] = {u(gen), u(gen)};
    at[i] = a[i] + Vec2{1000, -250};
    bt[i] = b[i] + Vec2{1000, -250};
  }
  const double h = distance_entropy(a, b);
  EXPECT_GE(h, 0.0);
  EXPECT_LE(h, 1.0);
  EXPECT_NEAR(distance_entropy(b, a), h, 1e-12);
  EXPECT_NEAR(distance_entropy(at, bt), h, 1e-12);
}

TEST(Dtw, Examples) {
  std::vector<Vec2> a{{0, 0}, {1, 2}, {3, 1}};
  EXPECT_EQ(dtw_distance(a, a), 0.0);
  std::vector<Vec2> p{{1, 1}}, q{{4, 5}};
  EXPECT_EQ(dtw_distance(p, q), 5.0);
  EXPECT_THROW(dtw_distance({}, a), std::invalid_argument);
}

TEST(Dtw, MatchesPathEnumeration) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(-5, 5);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::size_t m = 1; m <= 6; ++m) {
      for (int rep = 0; rep < 5; ++rep) {
        std::vector<Vec2> a(n), b(m);
        for (auto& v : a) v = {u(gen), u(gen)};
        for (auto& v : b) v = {u(gen), u(gen)};
        const double d = dtw_distance(a, b);
        EXPECT_NEAR(d, oracle::dtw_enumerate(a, b), 1e-12);
        EXPECT_NEAR(d, dtw_distance(b, a), 1e-12);
        EXPECT_GE(d, 0.0);
      }
    }
  }
}

TEST(Describe, Basics) {
  const auto one = describe({2.5});
  EXPECT_EQ(one.n, 1u);
  EXPECT_EQ(one.mean, 2.5);
  EXPECT_EQ(one.median, 2.5);
  EXPECT_EQ(one.sd, 0.0);

  const auto d = describe({1, 2, 3, 4, std::nan(""), INFINITY});
  EXPECT_EQ(d.n, 4u);
  EXPECT_EQ(d.mean, 2.5);
  EXPECT_EQ(d.median, 2.5);
  EXPECT_DOUBLE_EQ(d.sd, std::sqrt(1.25));

  const auto dup = describe({1, 2, 3, 4, 1, 2, 3, 4});
  EXPECT_EQ(dup.mean, d.mean);
  EXPECT_EQ(dup.median, d.median);
  EXPECT_DOUBLE_EQ(dup.sd, d.sd);
}

TEST(Metrics, RowsAndSummary) {
  std::vector<Vec2> a(200), b(200);
  std::vector<double> h(200);
  for (std::size_t i = 0; i < 200; ++i) {
    a[i] = {0.1 * i, 0};
    b[i] = {0.1 * i, 10 + std::sin(0.2 * i)};
    h[i] = physics::wrap_angle(0.05 * i + 0.3 * std::sin(0.7 * i));
  }
  std::vector<experiments::TrialTrace> traces;
  for (std::size_t k = 0; k < 4; ++k) {
    traces.push_back(pair_trace(a, b, h));
    traces.back().trial_index = k;
  }
  AnalysisSettings settings;
  settings.heading_stride = 2;
  const auto rows = compute_metrics("r1", "abc", traces, settings);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.neural_entropy, 0.0);
    EXPECT_NEAR(r.dtw, dtw_distance(a, b), 1e-12);
    EXPECT_TRUE(std::isfinite(r.distance_entropy));
    EXPECT_EQ(r.condition, "interactive");
  }
  traces[0].agents.pop_back();
  traces[0].condition = experiments::Condition::Isolated;
  const auto mixed = compute_metrics("r1", "abc", traces, settings);
  EXPECT_TRUE(std::isnan(mixed[0].distance_entropy));
  const auto summary = summarize(mixed);
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[0].condition, "interactive");
  EXPECT_EQ(summary[0].rows, 3u);
  EXPECT_EQ(summary[1].condition, "isolated");
  EXPECT_EQ(summary[1].metrics[2].stats.n, 0u);  // distance entropy: no partner
  EXPECT_NEAR(summary[0].metrics[3].stats.mean, dtw_distance(a, b), 1e-9);
}
