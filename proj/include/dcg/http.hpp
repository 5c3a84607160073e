#pragma once

#include <httplib.h>
#include <json.hpp>

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dcg/driver.hpp"
#include "dcg/relay.hpp"

namespace dcg {

// HTTP endpoints
//
//   POST /dcgw1                     body: one DCGW1 request, reply: one DCGW1 response
//   GET  /sessions/{id}/frame.bmp   current frame as a 24-bit BMP (advances the clock like GetFrame)
//   POST /relay/log                 JSON reaction log from a relay solver client
//   GET  /healthz                   "ok"
//
// Relay log body:
//   {"session": "<id>", "premature": 0,
//    "entries": [{"onset_ms": 1200, "click_ms": 3410}, ...]}

inline constexpr const char* kWirePath = "/dcgw1";

struct RelayLogUpload {
  std::string session;
  int premature = 0;
  std::vector<ReactionEntry> entries;
};

inline std::optional<RelayLogUpload> parse_relay_log(const std::string& body, std::string* why = nullptr) {
  auto fail = [&](const char* msg) -> std::optional<RelayLogUpload> {
    if (why) *why = msg;
    return std::nullopt;
  };
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return fail("body is not a JSON object");
  if (!j.contains("entries") || !j["entries"].is_array()) return fail("missing entries array");
  RelayLogUpload up;
  up.session = j.value("session", "");
  up.premature = j.value("premature", 0);
  for (const auto& e : j["entries"]) {
    if (!e.is_object() || !e.contains("onset_ms") || !e.contains("click_ms") || !e["onset_ms"].is_number() ||
        !e["click_ms"].is_number())
      return fail("entry needs numeric onset_ms and click_ms");
    up.entries.push_back({e["onset_ms"].get<double>() / 1000.0, e["click_ms"].get<double>() / 1000.0});
  }
  if (!reaction_log_monotone(up.entries)) return fail("reaction log is not monotone");
  return up;
}

inline std::string relay_log_json(const RelayLogUpload& up) {
  nlohmann::json j;
  j["session"] = up.session;
  j["premature"] = up.premature;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : up.entries)
    j["entries"].push_back({{"onset_ms", std::llround(e.onset * 1000)}, {"click_ms", std::llround(e.click * 1000)}});
  return j.dump();
}

/// Serves a ChallengeService over HTTP on one port.
class HttpServer {
 public:
  explicit HttpServer(ChallengeService& service, std::optional<std::filesystem::path> static_root = std::nullopt)
      : service_(service) {
    server_.Post(kWirePath, [this](const httplib::Request& req, httplib::Response& res) {
      const std::span<const uint8_t> bytes(reinterpret_cast<const uint8_t*>(req.body.data()), req.body.size());
      const auto reply = service_.handle(bytes);
      res.set_content(std::string(reply.begin(), reply.end()), "application/octet-stream");
    });
    server_.Get(R"(/sessions/([0-9a-f]+)/frame\.bmp)", [this](const httplib::Request& req, httplib::Response& res) {
      auto f = service_.get_frame(req.matches[1]);
      if (!f) {
        res.status = f.error() == WireError::ExpiredSession ? 410 : 404;
        res.set_content(std::string(to_string(f.error())), "text/plain");
        return;
      }
      const auto bmp = encode_bmp(f->frame);
      res.set_header("X-DCG-Status", std::string(to_string(f->status)));
      res.set_header("X-DCG-Frame-Index", std::to_string(f->frame_index));
      res.set_content(std::string(bmp.begin(), bmp.end()), "image/bmp");
    });
    server_.Post("/relay/log", [this](const httplib::Request& req, httplib::Response& res) {
      std::string why;
      auto up = parse_relay_log(req.body, &why);
      if (!up) {
        res.status = 400;
        res.set_content(nlohmann::json{{"ok", false}, {"error", why}}.dump(), "application/json");
        return;
      }
      const size_t n = up->entries.size();
      {
        std::lock_guard lock(mu_);
        logs_.push_back(std::move(*up));
      }
      res.set_content(nlohmann::json{{"ok", true}, {"entries", n}}.dump(), "application/json");
    });
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    if (static_root) server_.set_mount_point("/", static_root->string());
  }

  ~HttpServer() { stop(); }
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Blocks serving on the calling thread.
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

  std::vector<RelayLogUpload> relay_logs() const {
    std::lock_guard lock(mu_);
    return logs_;
  }

 private:
  ChallengeService& service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
  mutable std::mutex mu_;
  std::vector<RelayLogUpload> logs_;
};

/// DCGW1 over HTTP POST.
class HttpTransport : public Transport {
 public:
  HttpTransport(const std::string& host, int port) : client_(host, port) {
    client_.set_connection_timeout(5);
    client_.set_read_timeout(10);
  }

  Expected<std::vector<uint8_t>, WireError> roundtrip(std::span<const uint8_t> request) override {
    std::lock_guard lock(mu_);
    auto res = client_.Post(kWirePath, reinterpret_cast<const char*>(request.data()), request.size(),
                            "application/octet-stream");
    if (!res || res->status != 200) return unexpected(WireError::Unreachable);
    return std::vector<uint8_t>(res->body.begin(), res->body.end());
  }

 private:
  std::mutex mu_;
  httplib::Client client_;
};

}  // namespace dcg
