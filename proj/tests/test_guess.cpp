#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "dcg/guess.hpp"

using namespace dcg;

namespace {

// Attacker facing one target with `pool` remaining objects (one correct) makes `a`
// independent picks. Enumerate every pick sequence and count correct picks.
Rational expected_hits_one_target(int pool, int a) {
  uint64_t sequences = 0, hits = 0;
  std::vector<int> seq(static_cast<size_t>(a), 0);
  std::function<void(int)> rec = [&](int depth) {
    if (depth == a) {
      ++sequences;
      for (int v : seq) hits += v == 0;
      return;
    }
    for (int v = 0; v < pool; ++v) {
      seq[static_cast<size_t>(depth)] = v;
      rec(depth + 1);
    }
  };
  rec(0);
  return Rational::make(hits, sequences);
}

// Same attacker, but picks are distinct and stop at the first hit: the exact
// probability of finding the correct object within `a` tries.
Rational exact_success_one_target(int pool, int a) {
  uint64_t orders = 0, wins = 0;
  std::vector<int> perm(static_cast<size_t>(pool));
  for (int i = 0; i < pool; ++i) perm[static_cast<size_t>(i)] = i;
  do {
    ++orders;
    for (int k = 0; k < std::min(a, pool); ++k)
      if (perm[static_cast<size_t>(k)] == 0) {
        ++wins;
        break;
      }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return Rational::make(wins, orders);
}

}  // namespace

TEST(AnalyticGuess, ExactValuesForOneToThreeTargets) {
  EXPECT_EQ(analytic_guess_probability({1}), Rational::make(1, 900));
  EXPECT_EQ(analytic_guess_probability({2}), Rational::make(1, 356400));
  EXPECT_EQ(analytic_guess_probability({3}), Rational::make(1, 81496800));
}

TEST(AnalyticGuess, PercentagesToPrintedPrecision) {
  // Round the percentage to as many decimals as the published figure shows.
  auto pct = [](int r, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(analytic_guess_probability({r}).value() * 100 * scale) / scale;
  };
  EXPECT_DOUBLE_EQ(pct(1, 1), 0.1);
  EXPECT_DOUBLE_EQ(pct(2, 6), 0.000281);
  EXPECT_DOUBLE_EQ(pct(3, 8), 0.00000123);
}

TEST(AnalyticGuess, RejectsOutOfRange) {
  EXPECT_THROW(analytic_guess_probability({0}), std::invalid_argument);
  EXPECT_THROW(analytic_guess_probability({10}), std::invalid_argument);
}

TEST(ProbeSuccess, KnownValues) {
  EXPECT_EQ(estimate_probe_success({5, 3, 2}), Rational::make(8, 60));
  EXPECT_NEAR(estimate_probe_success({5, 3, 2}).value(), 0.13, 0.005);
  EXPECT_EQ(estimate_probe_success({1, 1, 1}), Rational::make(1, 1));
  EXPECT_EQ(estimate_probe_success({4, 2, 1}), Rational::make(1, 12));
  EXPECT_THROW(estimate_probe_success({3, 4, 1}), std::invalid_argument);
}

TEST(ProbeSuccess, MatchesExpectedHitEnumeration) {
  for (int o = 1; o <= 6; ++o)
    for (int t = 1; t <= o; ++t)
      for (int a = 1; a <= 3; ++a) {
        Rational oracle{1, 1};
        for (int j = 0; j < t; ++j) oracle = oracle * expected_hits_one_target(o - j, a);
        EXPECT_EQ(estimate_probe_success({o, t, a}), oracle) << o << "," << t << "," << a;
      }
}

TEST(ProbeSuccess, IsExactProbabilityWhenAttemptsFitThePool) {
  for (int o = 1; o <= 6; ++o)
    for (int t = 1; t <= o; ++t)
      for (int a = 1; a <= 3; ++a) {
        Rational exact{1, 1};
        for (int j = 0; j < t; ++j) exact = exact * exact_success_one_target(o - j, a);
        const Rational formula = estimate_probe_success({o, t, a});
        if (a <= o - t + 1)
          EXPECT_EQ(formula, exact) << o << "," << t << "," << a;
        else
          EXPECT_GT(formula.value(), exact.value()) << o << "," << t << "," << a;
      }
  EXPECT_EQ(estimate_probe_success({1, 1, 2}), Rational::make(2, 1));
}

TEST(GridOracle, MonteCarloNearAnalyticForOneTarget) {
  GridOracle oracle({1}, 42);
  const auto est = oracle.run(400'000);
  const double p = 1.0 / 900;
  EXPECT_LT(std::abs(est.rate - p), 3 * std::sqrt(p * (1 - p) / 400'000));
  EXPECT_LE(est.ci_low, p);
  EXPECT_GE(est.ci_high, p);
}

TEST(GridOracle, RefusesHugeTrialCounts) {
  GridOracle oracle({3}, 1);
  EXPECT_THROW(oracle.run(kMaxGuessTrials + 1), std::invalid_argument);
}

TEST(RateEstimate, WilsonIntervalBracketsRate) {
  const auto e = make_rate_estimate(30, 1000);
  EXPECT_DOUBLE_EQ(e.rate, 0.03);
  EXPECT_LT(e.ci_low, 0.03);
  EXPECT_GT(e.ci_high, 0.03);
  const auto z = make_rate_estimate(0, 100);
  EXPECT_EQ(z.ci_low, 0.0);
  EXPECT_GT(z.ci_high, 0.0);
}

TEST(Rational, ArithmeticReduces) {
  EXPECT_EQ(Rational::make(2, 4), Rational::make(1, 2));
  EXPECT_EQ(Rational::make(1, 3) + Rational::make(1, 6), Rational::make(1, 2));
  EXPECT_EQ(Rational::make(2, 3) * Rational::make(3, 4), Rational::make(1, 2));
}
