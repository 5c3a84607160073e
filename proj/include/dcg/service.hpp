#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "dcg/engine.hpp"
#include "dcg/expected.hpp"
#include "dcg/rng.hpp"
#include "dcg/wire.hpp"

namespace dcg {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now_seconds() const = 0;
};

/// Test and simulation clock; time only moves when told to.
class ManualClock : public Clock {
 public:
  explicit ManualClock(double start = 0.0) : now_(start) {}
  double now_seconds() const override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void advance(double seconds) {
    std::lock_guard lock(mu_);
    if (seconds > 0) now_ += seconds;
  }
  void set(double t) {
    std::lock_guard lock(mu_);
    if (t > now_) now_ = t;
  }

 private:
  mutable std::mutex mu_;
  double now_;
};

class SteadyClock : public Clock {
 public:
  double now_seconds() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct ServiceConfig {
  uint64_t master_seed = 1;
  int drag_cap = 2;
  std::optional<int> hold_cap;
  double timeout = 60.0;
  double expiry_grace = 30.0;  // seconds after a terminal state
  size_t max_sessions = 10000;
  std::optional<int> answer_variant;  // fixed variant for every session
  int answer_variant_pool = 1;        // otherwise drawn from [0, pool)
  int noise_variant = 0;
  bool expose_ground_truth = false;  // in-process test hook only, never on the wire
};

/// Server side of the challenge protocol: owns engine sessions and paces them
/// from its own clock.
class ChallengeService {
 public:
  ChallengeService(ServiceConfig cfg, std::shared_ptr<const Clock> clock)
      : cfg_(std::move(cfg)), clock_(std::move(clock)) {}

  const ServiceConfig& config() const { return cfg_; }

  Expected<TicketMsg, WireError> create_session(uint8_t game, uint8_t fps, uint8_t objects) {
    if (game > 3) return unexpected(WireError::UnknownGame);
    GameConfig gc;
    gc.game_type = static_cast<GameType>(game);
    gc.fps = fps;
    gc.object_count = objects;
    gc.timeout = cfg_.timeout;
    gc.drag_cap = cfg_.drag_cap;
    gc.hold_cap = cfg_.hold_cap;
    gc.noise_variant = cfg_.noise_variant;
    try {
      validate_config(gc);
    } catch (const ConfigError&) {
      return unexpected(WireError::InvalidParameterization);
    }
    const double now = clock_->now_seconds();
    std::unique_lock lock(map_mu_);
    sweep_locked(now);
    if (sessions_.size() >= cfg_.max_sessions) return unexpected(WireError::CapacityExceeded);
    const uint64_t n = counter_++;
    gc.seed = derive_seed(cfg_.master_seed, n);
    if (cfg_.answer_variant)
      gc.answer_variant = *cfg_.answer_variant;
    else if (cfg_.answer_variant_pool > 1)
      gc.answer_variant = static_cast<int>(mix64(gc.seed) % static_cast<uint64_t>(cfg_.answer_variant_pool));
    auto entry = std::make_shared<Entry>(gc);
    entry->created_at = now;
    TicketMsg t;
    t.session_id = make_id(n);
    t.created_ms = static_cast<uint64_t>(std::llround(now * 1000));
    t.game = game;
    t.fps = fps;
    t.objects = objects;
    sessions_.emplace(t.session_id, std::move(entry));
    return t;
  }

  Expected<FrameMsg, WireError> get_frame(const std::string& id) {
    auto e = lookup(id);
    if (!e) return unexpected(e.error());
    Entry& s = **e;
    std::lock_guard lock(s.mu);
    const double now = clock_->now_seconds();
    if (!s.started_at) s.started_at = now;
    sync(s, now);
    FrameMsg m;
    m.status = s.game.status();
    m.frame_index = static_cast<uint32_t>(s.game.frame_index());
    m.server_ms = static_cast<uint32_t>(std::llround((now - *s.started_at) * 1000));
    m.frame = s.game.render();
    return m;
  }

  Expected<EventResultMsg, WireError> post_event(const std::string& id, EventKind kind, Point p,
                                                 uint32_t /*client_ms*/) {
    auto e = lookup(id);
    if (!e) return unexpected(e.error());
    Entry& s = **e;
    std::lock_guard lock(s.mu);
    const double now = clock_->now_seconds();
    sync(s, now);
    if (kind == EventKind::Poll) return EventResultMsg{EventOutcome::Ack, s.game.status()};
    if (s.game.finished()) return unexpected(WireError::SessionTerminal);
    if (kind == EventKind::Click) {
      if (!s.game.background().bounds().contains(p)) return unexpected(WireError::OutOfBounds);
      auto h = s.game.begin_drag(p);
      if (!h) return unexpected(map_error(h.error()));
      s.handle = *h;
      return EventResultMsg{EventOutcome::Ack, s.game.status()};
    }
    if (!s.handle) return unexpected(WireError::InvalidSequence);
    auto fb = s.game.drop(*s.handle, p);
    if (!fb) {
      if (fb.error() != EngineError::DropOutsideFrame) s.handle.reset();
      return unexpected(map_error(fb.error()));
    }
    s.handle.reset();
    note_terminal(s, now);
    return EventResultMsg{fb->outcome == FeedbackOutcome::Star ? EventOutcome::Star : EventOutcome::Cross,
                          s.game.status()};
  }

  /// Decodes one DCGW1 request and returns the encoded response.
  std::vector<uint8_t> handle(std::span<const uint8_t> request) {
    Request req;
    try {
      req = decode_request(request);
    } catch (const FormatError& ex) {
      return encode_response(ErrorMsg{WireError::Malformed, ex.what()});
    }
    auto reply = [](auto&& result) -> Response {
      if (!result) return ErrorMsg{result.error(), std::string(to_string(result.error()))};
      return *result;
    };
    Response resp = std::visit(
        [&](const auto& m) -> Response {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, CreateSessionReq>)
            return reply(create_session(m.game, m.fps, m.objects));
          else if constexpr (std::is_same_v<T, GetFrameReq>)
            return reply(get_frame(m.session_id));
          else
            return reply(post_event(m.session_id, m.kind, {m.x, m.y}, m.client_ms));
        },
        req);
    return encode_response(resp);
  }

  /// In-process only, and only when the config allows it.
  std::optional<GroundTruth> ground_truth(const std::string& id) {
    if (!cfg_.expose_ground_truth) return std::nullopt;
    auto e = lookup(id);
    if (!e) return std::nullopt;
    std::lock_guard lock((*e)->mu);
    return (*e)->game.ground_truth();
  }

  std::optional<GameConfig> session_config(const std::string& id) {
    if (!cfg_.expose_ground_truth) return std::nullopt;
    auto e = lookup(id);
    if (!e) return std::nullopt;
    return (*e)->game.config();
  }

  size_t session_count() const {
    std::shared_lock lock(map_mu_);
    return sessions_.size();
  }

  void sweep() {
    std::unique_lock lock(map_mu_);
    sweep_locked(clock_->now_seconds());
  }

 private:
  struct Entry {
    explicit Entry(const GameConfig& c) : game(c) {}
    std::mutex mu;
    GameSession game;
    double created_at = 0;
    std::optional<double> started_at;
    std::optional<double> terminal_at;
    std::optional<DragHandle> handle;
  };

  static WireError map_error(EngineError e) {
    switch (e) {
      case EngineError::NoObjectAtPoint: return WireError::NoObjectAtPoint;
      case EngineError::InvalidHandle: return WireError::InvalidSequence;
      case EngineError::DropOutsideFrame: return WireError::DropOutsideFrame;
      case EngineError::HoldCapExceeded: return WireError::HoldCapExceeded;
      case EngineError::SessionFinished: return WireError::SessionTerminal;
    }
    return WireError::Malformed;
  }

  std::string make_id(uint64_t n) const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(mix64(cfg_.master_seed * 0x9E3779B97F4A7C15ULL + n + 1)));
    return buf;
  }

  Expected<std::shared_ptr<Entry>, WireError> lookup(const std::string& id) {
    const double now = clock_->now_seconds();
    std::shared_ptr<Entry> e;
    {
      std::shared_lock lock(map_mu_);
      if (expired_.count(id)) return unexpected(WireError::ExpiredSession);
      auto it = sessions_.find(id);
      if (it == sessions_.end()) return unexpected(WireError::UnknownSession);
      e = it->second;
    }
    bool expire = false;
    {
      std::lock_guard lock(e->mu);
      if (e->started_at) sync(*e, now);
      expire = e->terminal_at && now - *e->terminal_at > cfg_.expiry_grace;
    }
    if (expire) {
      std::unique_lock lock(map_mu_);
      sessions_.erase(id);
      expired_.insert(id);
      return unexpected(WireError::ExpiredSession);
    }
    return e;
  }

  // Brings the engine up to the frame implied by the server clock.
  void sync(Entry& s, double now) {
    if (s.started_at) {
      const double elapsed = now - *s.started_at;
      const int64_t target = static_cast<int64_t>(std::floor(elapsed * s.game.config().fps + 1e-9));
      while (!s.game.finished() && s.game.frame_index() < target) s.game.advance();
    }
    note_terminal(s, now);
  }

  void note_terminal(Entry& s, double now) {
    if (!s.game.finished() || s.terminal_at) return;
    if (s.game.status() == SessionStatus::TimedOut && s.started_at)
      s.terminal_at = *s.started_at + s.game.elapsed_seconds();
    else
      s.terminal_at = now;
  }

  void sweep_locked(double now) {
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      Entry& s = *it->second;
      std::unique_lock lock(s.mu, std::try_to_lock);
      bool drop = false;
      if (lock.owns_lock()) {
        if (s.started_at) sync(s, now);
        drop = s.terminal_at && now - *s.terminal_at > cfg_.expiry_grace;
      }
      if (drop) {
        expired_.insert(it->first);
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }

  ServiceConfig cfg_;
  std::shared_ptr<const Clock> clock_;
  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::set<std::string> expired_;
  uint64_t counter_ = 0;
};

}  // namespace dcg
