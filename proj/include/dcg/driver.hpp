#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dcg/expected.hpp"
#include "dcg/service.hpp"
#include "dcg/wire.hpp"

namespace dcg {

/// Carries one encoded DCGW1 request to a server and returns its raw reply.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual Expected<std::vector<uint8_t>, WireError> roundtrip(std::span<const uint8_t> request) = 0;
};

/// In-process transport. Optionally records every byte in both directions.
class LoopbackTransport : public Transport {
 public:
  explicit LoopbackTransport(ChallengeService& service, bool capture = false)
      : service_(service), capture_(capture) {}

  Expected<std::vector<uint8_t>, WireError> roundtrip(std::span<const uint8_t> request) override {
    auto reply = service_.handle(request);
    if (capture_) {
      std::lock_guard lock(mu_);
      requests_.emplace_back(request.begin(), request.end());
      responses_.push_back(reply);
    }
    return reply;
  }

  std::vector<std::vector<uint8_t>> captured_requests() const {
    std::lock_guard lock(mu_);
    return requests_;
  }
  std::vector<std::vector<uint8_t>> captured_responses() const {
    std::lock_guard lock(mu_);
    return responses_;
  }

 private:
  ChallengeService& service_;
  bool capture_;
  mutable std::mutex mu_;
  std::vector<std::vector<uint8_t>> requests_;
  std::vector<std::vector<uint8_t>> responses_;
};

/// Typed DCGW1 calls over any transport.
class WireClient {
 public:
  explicit WireClient(Transport& t) : transport_(t) {}

  Expected<TicketMsg, WireError> create_session(GameType g, int fps, int objects) {
    return call<TicketMsg>(CreateSessionReq{static_cast<uint8_t>(g), static_cast<uint8_t>(fps),
                                            static_cast<uint8_t>(objects)});
  }
  Expected<FrameMsg, WireError> get_frame(const std::string& id) { return call<FrameMsg>(GetFrameReq{id}); }
  Expected<EventResultMsg, WireError> post_event(const std::string& id, EventKind kind, Point p,
                                                 uint32_t client_ms = 0) {
    return call<EventResultMsg>(
        PostEventReq{id, kind, static_cast<int16_t>(p.x), static_cast<int16_t>(p.y), client_ms});
  }

 private:
  template <class T>
  Expected<T, WireError> call(const Request& req) {
    const auto bytes = encode_request(req);
    auto raw = transport_.roundtrip(bytes);
    if (!raw) return unexpected(raw.error());
    Response resp;
    try {
      resp = decode_response(*raw);
    } catch (const FormatError&) {
      return unexpected(WireError::Malformed);
    }
    if (auto* err = std::get_if<ErrorMsg>(&resp)) return unexpected(err->code);
    if (auto* ok = std::get_if<T>(&resp)) return std::move(*ok);
    return unexpected(WireError::Malformed);
  }

  Transport& transport_;
};

struct Observation {
  Frame frame;
  SessionStatus status = SessionStatus::InProgress;
  uint32_t frame_index = 0;
  double server_time = 0;
};

/// What an attacker (or any client) can do with a challenge: look at frames,
/// click, drop and let time pass.
class ChallengeSource {
 public:
  virtual ~ChallengeSource() = default;
  virtual Expected<TicketMsg, WireError> start(GameType game, int fps, int objects) = 0;
  virtual Expected<Observation, WireError> observe() = 0;
  virtual Expected<EventResultMsg, WireError> click(Point p) = 0;
  virtual Expected<EventResultMsg, WireError> drop(Point p) = 0;
  virtual void wait(double seconds) = 0;
  virtual double now() const = 0;
};

class WireChallengeSource : public ChallengeSource {
 public:
  using Waiter = std::function<void(double)>;
  using Now = std::function<double()>;

  WireChallengeSource(Transport& t, Waiter waiter, Now now)
      : client_(t), waiter_(std::move(waiter)), now_(std::move(now)) {}

  /// Real-time source: waiting sleeps.
  static std::unique_ptr<WireChallengeSource> realtime(Transport& t) {
    auto clock = std::make_shared<SteadyClock>();
    return std::make_unique<WireChallengeSource>(
        t, [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); },
        [clock] { return clock->now_seconds(); });
  }

  Expected<TicketMsg, WireError> start(GameType game, int fps, int objects) override {
    auto t = client_.create_session(game, fps, objects);
    if (t) session_ = t->session_id;
    return t;
  }
  Expected<Observation, WireError> observe() override {
    auto f = client_.get_frame(session_);
    if (!f) return unexpected(f.error());
    return Observation{std::move(f->frame), f->status, f->frame_index, f->server_ms / 1000.0};
  }
  Expected<EventResultMsg, WireError> click(Point p) override {
    return client_.post_event(session_, EventKind::Click, p, client_ms());
  }
  Expected<EventResultMsg, WireError> drop(Point p) override {
    return client_.post_event(session_, EventKind::Drop, p, client_ms());
  }
  void wait(double seconds) override {
    if (seconds > 0) waiter_(seconds);
  }
  double now() const override { return now_(); }

  const std::string& session_id() const { return session_; }

 private:
  uint32_t client_ms() const { return static_cast<uint32_t>(now_() * 1000); }

  WireClient client_;
  Waiter waiter_;
  Now now_;
  std::string session_;
};

/// Service, loopback wire and simulated clock bundled together so a run can
/// execute headless and faster than real time.
class EmbeddedService {
 public:
  explicit EmbeddedService(ServiceConfig cfg = {}, bool capture = false)
      : clock_(std::make_shared<ManualClock>()),
        service_(std::move(cfg), clock_),
        transport_(service_, capture),
        source_(transport_, [c = clock_](double s) { c->advance(s); }, [c = clock_] { return c->now_seconds(); }) {}

  EmbeddedService(const EmbeddedService&) = delete;
  EmbeddedService& operator=(const EmbeddedService&) = delete;

  ManualClock& clock() { return *clock_; }
  ChallengeService& service() { return service_; }
  LoopbackTransport& transport() { return transport_; }
  WireChallengeSource& source() { return source_; }

 private:
  std::shared_ptr<ManualClock> clock_;
  ChallengeService service_;
  LoopbackTransport transport_;
  WireChallengeSource source_;
};

}  // namespace dcg
