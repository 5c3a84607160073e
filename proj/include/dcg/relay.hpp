#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "dcg/engine.hpp"
#include "dcg/rng.hpp"

namespace dcg {

/// Normal distribution truncated below. A zero spread is degenerate and
/// returns the mean untouched.
struct Delay {
  double mean = 0;
  double sd = 0;
  double floor = 0.2;

  static Delay fixed(double s) { return {s, 0, 0}; }
};

inline double sample_delay(const Delay& d, Rng& rng) {
  if (d.sd <= 0) return std::max(0.0, d.mean);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal(d.mean, d.sd);
    if (v >= d.floor && v > 0) return v;
  }
  return std::max(d.floor, 1e-3);
}

struct RelayModel {
  Delay reaction{2.17, 0.2};
  Delay latency = Delay::fixed(0);               // one way, bot to solver
  std::optional<Delay> per_target_select;       // defaults to `reaction`
  int max_retries = 1000;                        // stimulus retries per object

  const Delay& select_delay() const { return per_target_select ? *per_target_select : reaction; }
};

inline double sample_reaction(const RelayModel& m, Rng& rng) { return sample_delay(m.reaction, rng); }

/// Reaction time defaults per game (all clicks).
inline Delay default_reaction(GameType g) {
  switch (g) {
    case GameType::Ships: return {2.27, 0.34};
    case GameType::Animals: return {2.58, 0.35};
    case GameType::Parking: return {2.50, 0.51};
    case GameType::Shapes: return {2.17, 0.20};
  }
  return {2.0, 0.3};
}

inline RelayModel default_relay_model(GameType g) {
  RelayModel m;
  m.reaction = default_reaction(g);
  return m;
}

inline RelayModel zero_delay_model() {
  RelayModel m;
  m.reaction = Delay::fixed(0);
  return m;
}

// --- Solver-side protocol ------------------------------------------------------

enum class RelayPhase : uint8_t { SelectTarget, AwaitStimulus, SelectObject, Done };

constexpr std::string_view to_string(RelayPhase p) {
  switch (p) {
    case RelayPhase::SelectTarget: return "select-target";
    case RelayPhase::AwaitStimulus: return "await-stimulus";
    case RelayPhase::SelectObject: return "select-object";
    case RelayPhase::Done: return "done";
  }
  return "?";
}

struct ReactionEntry {
  double onset = 0;  // stimulus time
  double click = 0;  // solver click time
  double reaction() const { return click - onset; }
};

/// The human solver's side of a static relay: mark a target, wait for the
/// stimulus, click the object. Clicks outside SelectObject are premature and
/// ignored. Driven by the simulator and by live clients alike.
class RelayProtocol {
 public:
  explicit RelayProtocol(std::vector<int> answers_per_target) : remaining_(std::move(answers_per_target)) {
    if (remaining_.empty()) throw std::invalid_argument("relay needs at least one target");
    for (int n : remaining_)
      if (n < 1) throw std::invalid_argument("every target needs an answer");
  }

  RelayPhase phase() const { return phase_; }
  int current_target() const { return target_; }
  const std::vector<ReactionEntry>& log() const { return log_; }
  int premature_clicks() const { return premature_; }

  bool mark_target(double t) {
    if (phase_ != RelayPhase::SelectTarget || !advance_time(t)) return false;
    phase_ = RelayPhase::AwaitStimulus;
    return true;
  }

  bool stimulus(double t) {
    if (phase_ != RelayPhase::AwaitStimulus || !advance_time(t)) return false;
    onset_ = t;
    phase_ = RelayPhase::SelectObject;
    return true;
  }

  /// Solver click. Returns false and counts it as premature unless a stimulus is showing.
  bool click(double t) {
    if (phase_ != RelayPhase::SelectObject || t < onset_) {
      ++premature_;
      return false;
    }
    advance_time(t);
    log_.push_back({onset_, t});
    phase_ = RelayPhase::AwaitStimulus;
    awaiting_result_ = true;
    return true;
  }

  /// Bot reports whether the replayed click grabbed the intended object.
  void object_result(bool hit) {
    if (!awaiting_result_) throw std::logic_error("no click to report on");
    awaiting_result_ = false;
    if (!hit) return;  // another stimulus for the same object
    if (--remaining_[static_cast<size_t>(target_)] > 0) return;
    if (++target_ >= static_cast<int>(remaining_.size()))
      phase_ = RelayPhase::Done;
    else
      phase_ = RelayPhase::SelectTarget;
  }

 private:
  bool advance_time(double t) {
    if (t < last_) return false;
    last_ = t;
    return true;
  }

  std::vector<int> remaining_;
  RelayPhase phase_ = RelayPhase::SelectTarget;
  int target_ = 0;
  double onset_ = 0;
  double last_ = 0;
  int premature_ = 0;
  bool awaiting_result_ = false;
  std::vector<ReactionEntry> log_;
};

/// Onsets and clicks never go back in time and each click follows its onset.
inline bool reaction_log_monotone(const std::vector<ReactionEntry>& log) {
  double last_click = -1;
  for (const auto& e : log) {
    if (e.click < e.onset || e.click <= last_click || e.onset < 0) return false;
    last_click = e.click;
  }
  return true;
}

// --- Simulation ----------------------------------------------------------------

struct RelayStats {
  uint64_t trials = 0;
  uint64_t completed = 0;
  uint64_t timed_out = 0;
  uint64_t locked_out = 0;
  uint64_t clicks = 0;
  uint64_t hits = 0;
  uint64_t misses = 0;        // click landed on no object
  uint64_t wrong_object = 0;  // click grabbed some other object
  uint64_t drop_failures = 0; // correct object, rejected drop
  double completion_rate = 0;
  double overall_time = 0;     // mean; unfinished trials count as the timeout
  double successful_time = 0;  // mean over completed trials
  double error_rate_per_click = 0;
  std::vector<double> reaction_samples;

  double per_click_success() const { return clicks ? static_cast<double>(hits) / clicks : 0.0; }
  /// Binomial standard error of per_click_success.
  double per_click_sigma() const {
    if (!clicks) return 0;
    const double p = per_click_success();
    return std::sqrt(p * (1 - p) / static_cast<double>(clicks));
  }
};

namespace detail {

inline Point grab_point(const ObjectState& o) {
  const Point g = o.sprite->grab_point();
  return {o.position.x + g.x, o.position.y + g.y};
}

inline void run_until(GameSession& s, double t) {
  const int64_t frame = static_cast<int64_t>(std::floor(t * s.config().fps + 1e-9));
  while (!s.finished() && s.frame_index() < frame) s.advance();
}

struct TrialTally {
  uint64_t clicks = 0, hits = 0, misses = 0, wrong = 0, drop_failures = 0;
};

inline void finish_stats(RelayStats& st, double total_time, double success_time) {
  st.completion_rate = st.trials ? static_cast<double>(st.completed) / st.trials : 0;
  st.overall_time = st.trials ? total_time / st.trials : 0;
  st.successful_time = st.completed ? success_time / st.completed : 0;
  st.error_rate_per_click = st.clicks ? static_cast<double>(st.misses + st.wrong_object) / st.clicks : 0;
}

}  // namespace detail

/// Answer objects grouped per sub-target, in sub-target then object id order.
inline std::vector<std::vector<int>> answers_by_target(const GameSession& s) {
  std::vector<std::vector<int>> out(s.target().sub_targets.size());
  for (const auto& o : s.objects())
    if (o.is_answer && o.bound_target) out[static_cast<size_t>(*o.bound_target)].push_back(o.id);
  out.erase(std::remove_if(out.begin(), out.end(), [](const auto& v) { return v.empty(); }), out.end());
  return out;
}

struct RelayTrace {
  SessionStatus status = SessionStatus::InProgress;
  double time = 0;
  detail::TrialTally tally;
  std::vector<ReactionEntry> log;
};

/// One static-relay game: the solver marks each target, then for every answer
/// object sees a frozen snapshot and clicks where the object was. The bot
/// replays that click into the live game once the response arrives.
inline RelayTrace relay_trial(const GameConfig& cfg, const RelayModel& model, Rng& rng,
                              std::vector<double>* reactions = nullptr) {
  GameSession s(cfg);
  const auto groups = answers_by_target(s);
  std::vector<int> counts;
  for (const auto& g : groups) counts.push_back(static_cast<int>(g.size()));
  RelayProtocol proto(counts);
  RelayTrace tr;
  double t = 0;
  const double limit = cfg.timeout;
  for (const auto& group : groups) {
    t += sample_delay(model.select_delay(), rng);
    if (t >= limit) break;
    proto.mark_target(t);
    for (int id : group) {
      bool done = false;
      for (int attempt = 0; attempt <= model.max_retries && !done; ++attempt) {
        detail::run_until(s, t);
        if (s.finished()) break;
        const ObjectState& obj = s.objects()[static_cast<size_t>(id)];
        const Point seen = detail::grab_point(obj);  // snapshot taken now
        const double lat_out = sample_delay(model.latency, rng);
        proto.stimulus(t + lat_out);
        const double r = sample_delay(model.reaction, rng);
        if (reactions) reactions->push_back(r);
        const double lat_back = sample_delay(model.latency, rng);
        t += lat_out + r + lat_back;
        if (t >= limit) break;
        proto.click(t - lat_back);
        detail::run_until(s, t);
        if (s.finished()) break;
        ++tr.tally.clicks;
        auto h = s.begin_drag(seen);
        if (!h) {
          ++tr.tally.misses;
          proto.object_result(false);
          continue;
        }
        const int drop_target = *obj.bound_target;
        auto fb = s.drop(*h, s.sub_target(drop_target).centroid);
        if (h->object_id != id) {
          ++tr.tally.wrong;
          proto.object_result(false);
          if (s.finished()) break;
          continue;
        }
        if (!fb || fb->outcome != FeedbackOutcome::Star) {
          ++tr.tally.drop_failures;
          proto.object_result(false);
          continue;
        }
        ++tr.tally.hits;
        proto.object_result(true);
        done = true;
      }
      if (!done) break;
    }
    if (s.finished()) break;
  }
  if (s.status() == SessionStatus::InProgress && t >= limit) {
    detail::run_until(s, limit + 1.0 / cfg.fps);
  }
  tr.status = s.status();
  tr.time = s.status() == SessionStatus::Complete ? t : limit;
  tr.log = proto.log();
  return tr;
}

inline RelayStats simulate_static_relay(const GameConfig& config, const RelayModel& model, uint64_t trials,
                                        uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  validate_config(config);
  RelayStats st;
  double total = 0, success = 0;
  for (uint64_t i = 0; i < trials; ++i) {
    GameConfig cfg = config;
    cfg.seed = derive_seed(seed, i);
    Rng rng(derive_seed(cfg.seed, 0x7e1a));
    const auto tr = relay_trial(cfg, model, rng, &st.reaction_samples);
    ++st.trials;
    st.clicks += tr.tally.clicks;
    st.hits += tr.tally.hits;
    st.misses += tr.tally.misses;
    st.wrong_object += tr.tally.wrong;
    st.drop_failures += tr.tally.drop_failures;
    switch (tr.status) {
      case SessionStatus::Complete:
        ++st.completed;
        success += tr.time;
        break;
      case SessionStatus::LockedOut: ++st.locked_out; break;
      default: ++st.timed_out; break;
    }
    total += tr.status == SessionStatus::Complete ? tr.time : config.timeout;
  }
  detail::finish_stats(st, total, success);
  return st;
}

/// Direct play with perfect knowledge and no delay at all: each answer is
/// grabbed where it is and dropped on its sub-target in the same frame.
inline RelayStats scripted_direct_play(const GameConfig& config, uint64_t trials, uint64_t seed) {
  RelayStats st;
  double total = 0, success = 0;
  for (uint64_t i = 0; i < trials; ++i) {
    GameConfig cfg = config;
    cfg.seed = derive_seed(seed, i);
    GameSession s(cfg);
    for (const auto& group : answers_by_target(s))
      for (int id : group) {
        const ObjectState& obj = s.objects()[static_cast<size_t>(id)];
        ++st.clicks;
        auto h = s.begin_drag(detail::grab_point(obj));
        if (!h || h->object_id != id) {
          ++st.misses;
          continue;
        }
        auto fb = s.drop(*h, s.sub_target(*obj.bound_target).centroid);
        if (fb && fb->outcome == FeedbackOutcome::Star) ++st.hits;
      }
    ++st.trials;
    const double t = s.frame_index() / static_cast<double>(cfg.fps);
    if (s.status() == SessionStatus::Complete) {
      ++st.completed;
      success += t;
      total += t;
    } else {
      total += cfg.timeout;
    }
  }
  detail::finish_stats(st, total, success);
  return st;
}

}  // namespace dcg
