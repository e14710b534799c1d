#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "lbap/errors.hpp"
#include "lbap/posterior.hpp"

using namespace lbap;

namespace {

std::vector<double> brute_force(const std::vector<double>& prior, const std::vector<double>& s,
                                const std::vector<double>& w) {
  std::vector<double> out(prior.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < prior.size(); ++i) total += static_cast<long double>(prior[i]) * s[i] * w[i];
  for (std::size_t i = 0; i < prior.size(); ++i) {
    out[i] = static_cast<double>(static_cast<long double>(prior[i]) * s[i] * w[i] / total);
  }
  return out;
}

}  // namespace

TEST(ComputePosterior, TwoOptionExample) {
  const auto p = compute_posterior(std::vector{0.5, 0.5}, std::vector{1.0, 0.001}, std::vector{1.0, 1.0},
                                   MethodMode::Full);
  EXPECT_NEAR(p[0], 0.9990009990009991, 1e-15);
  EXPECT_NEAR(p[1], 0.0009990009990009992, 1e-15);
}

TEST(ComputePosterior, FourOptionExample) {
  const auto p = compute_posterior(std::vector{0.4, 0.3, 0.2, 0.1}, std::vector{1.0, 1.0, 1.0, 1.0},
                                   std::vector{0.9, 0.5, 0.9, 0.9}, MethodMode::Full);
  const std::vector<double> oracle{0.46153846153846156, 0.1923076923076923, 0.23076923076923078, 0.11538461538461539};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(p[i], oracle[i], 1e-15);
}

TEST(ComputePosterior, UnitLikelihoodsAndPriorOnlyReturnThePrior) {
  const std::vector<double> prior{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> ones(4, 1.0);
  const std::vector<double> s{1e-3, 1.0, 1.0, 1e-3};
  const std::vector<double> w{0.2, 0.9, 0.1, 0.5};
  const auto a = compute_posterior(prior, ones, ones, MethodMode::Full);
  const auto b = compute_posterior(prior, s, w, MethodMode::PriorOnly);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(a[i], prior[i], 1e-15);
    EXPECT_EQ(b[i], prior[i]);
  }
}

TEST(ComputePosterior, ModesSelectFactors) {
  const std::vector<double> prior{0.5, 0.5};
  const std::vector<double> s{1.0, 0.5};
  const std::vector<double> w{0.5, 1.0};
  EXPECT_NEAR(compute_posterior(prior, s, w, MethodMode::SceneOnly)[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(compute_posterior(prior, s, w, MethodMode::WorldOnly)[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(compute_posterior(prior, s, w, MethodMode::Full)[0], 0.5, 1e-15);
}

TEST(ComputePosterior, DegenerateAndMisaligned) {
  EXPECT_THROW(compute_posterior(std::vector{0.0, 0.0}, std::vector{1.0, 1.0}, std::vector{1.0, 1.0},
                                 MethodMode::Full),
               DegenerateMass);
  EXPECT_THROW(compute_posterior(std::vector{0.5, 0.5}, std::vector{1.0}, std::vector{1.0, 1.0}, MethodMode::Full),
               InvariantViolation);
}

TEST(ComputePosterior, AgreesWithBruteForceOn10kInstances) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  std::uniform_int_distribution<int> size(2, 6);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto n = static_cast<std::size_t>(size(rng));
    std::vector<double> prior(n), s(n), w(n);
    double total = 0.0;
    for (auto& v : prior) total += (v = u(rng));
    for (auto& v : prior) v /= total;
    for (auto& v : s) v = u(rng) < 0.3 ? 1e-3 : 1.0;
    for (auto& v : w) v = u(rng);
    const auto p = compute_posterior(prior, s, w, MethodMode::Full);
    const auto q = brute_force(prior, s, w);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_NEAR(p[i], q[i], 1e-12);
      sum += p[i];
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(ComputePosterior, ScalingLeavesEverythingUnchanged) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + trial % 5;
    std::vector<double> prior(n), w(n), w_scaled(n);
    const std::vector<double> s(n, 1.0);
    double total = 0.0;
    for (auto& v : prior) total += (v = u(rng));
    for (auto& v : prior) v /= total;
    const double c = u(rng);
    for (std::size_t i = 0; i < n; ++i) w_scaled[i] = c * (w[i] = u(rng));
    const auto a = compute_posterior(prior, s, w, MethodMode::Full);
    const auto b = compute_posterior(prior, s, w_scaled, MethodMode::Full);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.emplace_back(1, static_cast<char>('A' + i));
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    for (double t : {0.05, 0.2, 0.45}) {
      // keep clear of exact ties at the threshold
      bool near = false;
      for (double v : a) near = near || std::abs(v - t) < 1e-9;
      if (near) continue;
      EXPECT_EQ(build_prediction_set(a, labels, t).members, build_prediction_set(b, labels, t).members);
    }
  }
}

TEST(PredictionSet, Examples) {
  const std::vector<std::string> abc{"A", "B", "C"};
  EXPECT_EQ(build_prediction_set(std::vector{0.7, 0.2, 0.1}, abc, 0.25).members, std::vector<std::string>{"A"});
  EXPECT_EQ(build_prediction_set(std::vector{0.7, 0.2, 0.1}, abc, 0.05).members, abc);
  const auto fb = build_prediction_set(std::vector{0.3, 0.3, 0.2, 0.2}, {"A", "B", "C", "D"}, 0.5);
  EXPECT_EQ(fb.members, std::vector<std::string>{"A"});
  EXPECT_TRUE(fb.fallback);
  EXPECT_EQ(build_prediction_set(std::vector{0.5, 0.5}, {"A", "B"}, 0.5).members, std::vector<std::string>{"A"});
  EXPECT_THROW(build_prediction_set(std::vector{0.5, 0.5}, {"A", "B"}, 0.0), InvariantViolation);
  EXPECT_THROW(build_prediction_set(std::vector{0.5, 0.5}, {"A", "B"}, 1.0), InvariantViolation);
}

TEST(PredictionSet, NestedAcrossThresholds) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<double> grid{1e-7, 1e-4, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7};
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + trial % 5;
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& v : p) total += (v = u(rng));
    for (auto& v : p) v /= total;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.emplace_back(1, static_cast<char>('A' + i));
    const std::string best = labels[argmax(p)];
    for (std::size_t k = 1; k < grid.size(); ++k) {
      const auto lo = build_prediction_set(p, labels, grid[k - 1]);
      const auto hi = build_prediction_set(p, labels, grid[k]);
      for (const auto& m : hi.members) EXPECT_TRUE(lo.contains(m) || m == best);
      EXPECT_LE(hi.size(), lo.size());
    }
  }
}

TEST(Decide, SingletonExecutes) {
  const auto d = decide(PredictionSet{{"A"}, 0.5, false});
  ASSERT_TRUE(std::holds_alternative<Execute>(d));
  EXPECT_EQ(std::get<Execute>(d).label, "A");
  EXPECT_TRUE(std::holds_alternative<AskHelp>(decide(PredictionSet{{"A", "B"}, 0.5, false})));
  const auto four = decide(PredictionSet{{"A", "B", "C", "D"}, 0.5, false});
  ASSERT_TRUE(std::holds_alternative<AskHelp>(four));
  EXPECT_EQ(std::get<AskHelp>(four).set.size(), 4u);
}

TEST(MethodMode, Names) {
  for (const char* name : {"full", "scene-only", "world-only", "prior-only", "no-help", "prompt", "binary"}) {
    const auto m = method_mode_from_string(name);
    ASSERT_TRUE(m.has_value()) << name;
    EXPECT_EQ(to_string(*m), name);
  }
  EXPECT_FALSE(method_mode_from_string("lbap").has_value());
}

TEST(Argmax, FirstIndexOnTies) {
  EXPECT_EQ(argmax(std::vector{0.2, 0.4, 0.4}), 1u);
  EXPECT_EQ(argmax(std::vector{0.5}), 0u);
}
