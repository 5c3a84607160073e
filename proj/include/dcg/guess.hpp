#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcg/rng.hpp"

namespace dcg {

/// Non-negative exact fraction, always reduced.
struct Rational {
  uint64_t num = 0;
  uint64_t den = 1;

  static Rational make(uint64_t n, uint64_t d) {
    if (d == 0) throw std::domain_error("zero denominator");
    const uint64_t g = std::gcd(n, d);
    return {n / (g ? g : 1), d / (g ? g : 1)};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
  friend Rational operator*(const Rational& a, const Rational& b) {
    const Rational x = make(a.num, b.den), y = make(b.num, a.den);
    return make(x.num * y.num, x.den * y.den);
  }
  friend Rational operator+(const Rational& a, const Rational& b) {
    const uint64_t l = std::lcm(a.den, b.den);
    return make(a.num * (l / a.den) + b.num * (l / b.den), l);
  }
  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

inline uint64_t binomial(uint64_t n, uint64_t k) {
  if (k > n) return 0;
  uint64_t r = 1;
  for (uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline uint64_t permutations(uint64_t n, uint64_t k) {
  if (k > n) return 0;
  uint64_t r = 1;
  for (uint64_t i = 0; i < k; ++i) r *= n - i;
  return r;
}

struct GuessModel {
  int r = 1;
  int object_cells = 100;  // 10 x 10 grid over the moving area
  int target_cells = 9;    // 3 x 3 grid over the target area
};

/// Single-attempt success of dropping r random grid cells onto random target cells:
/// 1 / (C(object_cells, r) * P(target_cells, r)).
inline Rational analytic_guess_probability(const GuessModel& m) {
  if (m.r < 1 || m.r > m.target_cells) throw std::invalid_argument("r must be in [1, target cells]");
  return Rational::make(1, binomial(static_cast<uint64_t>(m.object_cells), static_cast<uint64_t>(m.r)) *
                               permutations(static_cast<uint64_t>(m.target_cells), static_cast<uint64_t>(m.r)));
}

struct ProbeModel {
  int o = 5;  // foreground objects
  int t = 3;  // answer objects
  int a = 2;  // drag attempts per object

  void validate() const {
    if (t < 1 || t > o || a < 1) throw std::invalid_argument("probe model needs 1 <= t <= o and a >= 1");
  }
};

/// a^t / (C(o,t) * t!). This counts favourable (attempt, assignment) pairs and so
/// over-counts when a > o - t + 1; it is not clamped to 1.
inline Rational estimate_probe_success(const ProbeModel& m) {
  m.validate();
  uint64_t at = 1;
  for (int i = 0; i < m.t; ++i) at *= static_cast<uint64_t>(m.a);
  const uint64_t denom = binomial(static_cast<uint64_t>(m.o), static_cast<uint64_t>(m.t)) *
                         permutations(static_cast<uint64_t>(m.t), static_cast<uint64_t>(m.t));
  return Rational::make(at, denom);
}

struct RateEstimate {
  uint64_t trials = 0;
  uint64_t successes = 0;
  double rate = 0;
  double ci_low = 0;  // Wilson 95%
  double ci_high = 0;
};

inline RateEstimate make_rate_estimate(uint64_t successes, uint64_t trials) {
  RateEstimate e;
  e.trials = trials;
  e.successes = successes;
  if (trials == 0) return e;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z = 1.959963984540054;
  const double denom = 1 + z * z / n;
  const double centre = (p + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  e.rate = p;
  e.ci_low = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  e.ci_high = successes == trials ? 1.0 : std::min(1.0, centre + half);
  return e;
}

inline constexpr uint64_t kMaxGuessTrials = 100'000'000;

/// Idealised random-guess attacker: the r answers sit in fixed grid cells with
/// fixed target cells; each trial picks r distinct cells in order and an ordered
/// arrangement of r distinct target cells.
class GridOracle {
 public:
  explicit GridOracle(const GuessModel& m, uint64_t seed) : model_(m), rng_(seed) {
    if (m.r < 1 || m.r > m.target_cells || m.r > m.object_cells) throw std::invalid_argument("bad guess model");
    std::vector<int> cells(static_cast<size_t>(m.object_cells));
    std::iota(cells.begin(), cells.end(), 0);
    rng_.shuffle(cells.begin(), cells.end());
    std::vector<int> targets(static_cast<size_t>(m.target_cells));
    std::iota(targets.begin(), targets.end(), 0);
    rng_.shuffle(targets.begin(), targets.end());
    answer_target_.assign(static_cast<size_t>(m.object_cells), -1);
    for (int i = 0; i < m.r; ++i) answer_target_[static_cast<size_t>(cells[static_cast<size_t>(i)])] = targets[static_cast<size_t>(i)];
  }

  bool trial() {
    int picked[9];
    int dest[9];
    for (int i = 0; i < model_.r; ++i) {
      picked[i] = draw_distinct(picked, i, model_.object_cells);
      dest[i] = draw_distinct(dest, i, model_.target_cells);
    }
    for (int i = 0; i < model_.r; ++i)
      if (answer_target_[static_cast<size_t>(picked[i])] != dest[i]) return false;
    return true;
  }

  RateEstimate run(uint64_t trials) {
    if (trials > kMaxGuessTrials)
      throw std::invalid_argument("refusing " + std::to_string(trials) + " trials (limit " +
                                  std::to_string(kMaxGuessTrials) + "); use the analytic value instead");
    uint64_t hits = 0;
    for (uint64_t i = 0; i < trials; ++i) hits += trial();
    return make_rate_estimate(hits, trials);
  }

 private:
  int draw_distinct(const int* prior, int count, int n) {
    for (;;) {
      const int v = static_cast<int>(rng_.below(static_cast<uint64_t>(n)));
      bool dup = false;
      for (int j = 0; j < count; ++j) dup |= prior[j] == v;
      if (!dup) return v;
    }
  }

  GuessModel model_;
  Rng rng_;
  std::vector<int> answer_target_;
};

}  // namespace dcg
