#include <gtest/gtest.h>

#include "dcg/http.hpp"
#include "dcg/solver.hpp"

using namespace dcg;

namespace {

struct Served {
  explicit Served(ServiceConfig cfg = {})
      : clock(std::make_shared<ManualClock>()), service(std::move(cfg), clock), server(service) {
    port = server.start();
  }
  std::shared_ptr<ManualClock> clock;
  ChallengeService service;
  HttpServer server;
  int port = 0;
};

}  // namespace

TEST(Http, Health) {
  Served s;
  httplib::Client c("127.0.0.1", s.port);
  auto r = c.Get("/healthz");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "ok");
}

TEST(Http, WireRoundTrip) {
  Served s;
  HttpTransport t("127.0.0.1", s.port);
  WireClient client(t);
  auto ticket = client.create_session(GameType::Shapes, 20, 4);
  ASSERT_TRUE(ticket);
  s.clock->advance(1.0);
  auto f = client.get_frame(ticket->session_id);
  ASSERT_TRUE(f);
  EXPECT_EQ(f->frame.width(), 360);
  EXPECT_EQ(f->frame.height(), 130);
  EXPECT_EQ(f->status, SessionStatus::InProgress);
  auto bad = client.get_frame("0000000000000000");
  ASSERT_FALSE(bad);
  EXPECT_EQ(bad.error(), WireError::UnknownSession);
  auto none = client.create_session(GameType::Shapes, 30, 4);
  ASSERT_FALSE(none);
  EXPECT_EQ(none.error(), WireError::InvalidParameterization);
}

TEST(Http, GarbageBodyGetsMalformedError) {
  Served s;
  httplib::Client c("127.0.0.1", s.port);
  auto r = c.Post(kWirePath, "hello", "application/octet-stream");
  ASSERT_TRUE(r);
  const std::vector<uint8_t> bytes(r->body.begin(), r->body.end());
  const auto resp = decode_response(bytes);
  ASSERT_TRUE(std::holds_alternative<ErrorMsg>(resp));
  EXPECT_EQ(std::get<ErrorMsg>(resp).code, WireError::Malformed);
}

TEST(Http, FrameAsBitmap) {
  Served s;
  auto ticket = s.service.create_session(0, 20, 4);
  ASSERT_TRUE(ticket);
  httplib::Client c("127.0.0.1", s.port);
  auto r = c.Get("/sessions/" + ticket->session_id + "/frame.bmp");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Content-Type"), "image/bmp");
  ASSERT_EQ(r->body.size(), 54u + 360u * 3u * 130u);
  EXPECT_EQ(r->body.substr(0, 2), "BM");
  EXPECT_EQ(r->get_header_value("X-DCG-Status"), "in-progress");
  auto missing = c.Get("/sessions/0123456789abcdef/frame.bmp");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
}

TEST(Http, RelayLogUpload) {
  Served s;
  httplib::Client c("127.0.0.1", s.port);
  RelayLogUpload up{"abc", 1, {{1.0, 3.2}, {3.2, 5.0}}};
  auto ok = c.Post("/relay/log", relay_log_json(up), "application/json");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  auto logs = s.server.relay_logs();
  ASSERT_EQ(logs.size(), 1u);
  EXPECT_EQ(logs[0].session, "abc");
  EXPECT_EQ(logs[0].premature, 1);
  ASSERT_EQ(logs[0].entries.size(), 2u);
  EXPECT_DOUBLE_EQ(logs[0].entries[1].reaction(), 1.8);

  auto backwards = c.Post("/relay/log", R"({"entries":[{"onset_ms":0,"click_ms":900},{"onset_ms":900,"click_ms":800}]})",
                          "application/json");
  ASSERT_TRUE(backwards);
  EXPECT_EQ(backwards->status, 400);
  auto junk = c.Post("/relay/log", "{not json", "application/json");
  ASSERT_TRUE(junk);
  EXPECT_EQ(junk->status, 400);
  EXPECT_EQ(s.server.relay_logs().size(), 1u);
}

TEST(Http, UnreachableServer) {
  int port;
  {
    Served s;
    port = s.port;
  }
  HttpTransport t("127.0.0.1", port);
  WireClient client(t);
  auto r = client.create_session(GameType::Ships, 20, 4);
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error(), WireError::Unreachable);
}

// The solver needs nothing beyond the public wire interface.
TEST(Http, ProbeAndAttackOverHttp) {
  Served s;
  HttpTransport t("127.0.0.1", s.port);
  auto clock = s.clock;
  WireChallengeSource src(t, [clock](double d) { clock->advance(d); }, [clock] { return clock->now_seconds(); });
  auto rep = probe_game(src, GameType::Ships, 20, 5);
  ASSERT_TRUE(rep);
  Dictionary db;
  db.upsert(rep->record);
  const auto r = attack(src, db, GameType::Ships, 20, 4);
  EXPECT_EQ(r.outcome, AttackOutcome::Success);
}
