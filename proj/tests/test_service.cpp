#include <gtest/gtest.h>

#include <set>

#include "dcg/driver.hpp"

using namespace dcg;

namespace {

struct Fixture {
  explicit Fixture(ServiceConfig cfg = {}) : clock(std::make_shared<ManualClock>()), svc(with_truth(cfg), clock) {}
  static ServiceConfig with_truth(ServiceConfig c) {
    c.expose_ground_truth = true;
    return c;
  }
  std::shared_ptr<ManualClock> clock;
  ChallengeService svc;
};

Point center_of(const ObjectTruth& t) { return t.bbox.center_pixel(); }

}  // namespace

TEST(Wire, RequestsRoundTrip) {
  const std::vector<Request> reqs = {CreateSessionReq{1, 20, 4}, GetFrameReq{"abc"},
                                     PostEventReq{"s1", EventKind::Drop, -3, 129, 777}};
  for (const auto& r : reqs) EXPECT_EQ(decode_request(encode_request(r)), r);
}

TEST(Wire, ResponsesRoundTrip) {
  Frame f(360, 130, 9);
  f.set_code(3, 4, 60);
  const std::vector<Response> resps = {TicketMsg{"id", 12345678901ULL, 2, 40, 6},
                                       FrameMsg{SessionStatus::LockedOut, 77, 3850, f},
                                       EventResultMsg{EventOutcome::Cross, SessionStatus::InProgress},
                                       ErrorMsg{WireError::UnknownSession, "unknown session"}};
  for (const auto& r : resps) EXPECT_EQ(decode_response(encode_response(r)), r);
}

TEST(Wire, EnvelopeLayout) {
  const auto b = encode_request(CreateSessionReq{3, 10, 5});
  ASSERT_EQ(b.size(), 4u + 5u + 1u + 3u);
  EXPECT_EQ(b[0], 9);  // length after the prefix
  EXPECT_EQ(std::string(b.begin() + 4, b.begin() + 9), "DCGW1");
  EXPECT_EQ(b[9], 0x01);
  EXPECT_EQ(b[10], 3);
  EXPECT_EQ(b[11], 10);
  EXPECT_EQ(b[12], 5);
}

TEST(Wire, MalformedInputRejected) {
  auto good = encode_request(GetFrameReq{"abc"});
  auto bad_len = good;
  bad_len[0]++;
  EXPECT_THROW(decode_request(bad_len), FormatError);
  auto bad_magic = good;
  bad_magic[5] = 'X';
  EXPECT_THROW(decode_request(bad_magic), FormatError);
  auto bad_type = good;
  bad_type[9] = 0x81;
  EXPECT_THROW(decode_request(bad_type), FormatError);
  auto ev = encode_request(PostEventReq{"a", EventKind::Click, 1, 1, 0});
  ev[4 + 5 + 1 + 2] = 9;  // kind byte
  EXPECT_THROW(decode_request(ev), FormatError);
  EXPECT_THROW(decode_request(std::vector<uint8_t>{1, 2}), FormatError);
}

TEST(Wire, ServiceAnswersGarbageWithMalformedError) {
  Fixture fx;
  const std::vector<uint8_t> junk = {0, 0, 0, 0};
  auto resp = decode_response(fx.svc.handle(junk));
  ASSERT_TRUE(std::holds_alternative<ErrorMsg>(resp));
  EXPECT_EQ(std::get<ErrorMsg>(resp).code, WireError::Malformed);
}

TEST(Service, CreateReturnsTicketAndFullSizeFrame) {
  Fixture fx;
  auto t = fx.svc.create_session(static_cast<uint8_t>(GameType::Shapes), 20, 4);
  ASSERT_TRUE(t);
  EXPECT_EQ(t->fps, 20);
  auto f = fx.svc.get_frame(t->session_id);
  ASSERT_TRUE(f);
  EXPECT_EQ(f->frame.width(), 360);
  EXPECT_EQ(f->frame.height(), 130);
  EXPECT_EQ(f->frame_index, 0u);
}

TEST(Service, RejectsUnknownGameAndBadParameters) {
  Fixture fx;
  EXPECT_EQ(fx.svc.create_session(9, 20, 4).error(), WireError::UnknownGame);
  EXPECT_EQ(fx.svc.create_session(0, 25, 4).error(), WireError::InvalidParameterization);
  EXPECT_EQ(fx.svc.create_session(0, 20, 3).error(), WireError::InvalidParameterization);
}

TEST(Service, SessionIdsAreDistinct) {
  Fixture fx;
  std::set<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.insert(fx.svc.create_session(0, 20, 4)->session_id);
  EXPECT_EQ(ids.size(), 50u);
}

TEST(Service, FrameIndexFollowsServerClock) {
  Fixture fx;
  auto t = fx.svc.create_session(1, 20, 4);
  fx.clock->advance(5.0);  // the clock starts at the first fetch, not at creation
  ASSERT_EQ(fx.svc.get_frame(t->session_id)->frame_index, 0u);
  fx.clock->advance(1.0);
  const auto idx = fx.svc.get_frame(t->session_id)->frame_index;
  EXPECT_NEAR(static_cast<double>(idx), 20.0, 1.0);
}

TEST(Service, FrameIndexNeverDecreases) {
  Fixture fx;
  auto t = fx.svc.create_session(2, 40, 6);
  Rng rng(3);
  uint32_t last = 0;
  for (int i = 0; i < 200; ++i) {
    fx.clock->advance(rng.uniform01() * 0.3);
    const auto f = fx.svc.get_frame(t->session_id);
    ASSERT_TRUE(f);
    EXPECT_GE(f->frame_index, last);
    last = f->frame_index;
  }
}

TEST(Service, TimesOutThenExpires) {
  Fixture fx;
  auto t = fx.svc.create_session(0, 20, 4);
  fx.svc.get_frame(t->session_id);
  fx.clock->advance(61.0);
  auto f = fx.svc.get_frame(t->session_id);
  ASSERT_TRUE(f);
  EXPECT_EQ(f->status, SessionStatus::TimedOut);
  EXPECT_EQ(f->frame_index, 1200u);
  fx.clock->advance(30.0);
  EXPECT_EQ(fx.svc.get_frame(t->session_id).error(), WireError::ExpiredSession);
}

TEST(Service, BogusTicketIsUnknown) {
  Fixture fx;
  EXPECT_EQ(fx.svc.get_frame("nope").error(), WireError::UnknownSession);
  EXPECT_EQ(fx.svc.post_event("nope", EventKind::Poll, {0, 0}, 0).error(), WireError::UnknownSession);
}

TEST(Service, ScriptedPlayCompletesWithStars) {
  Fixture fx;
  auto t = fx.svc.create_session(static_cast<uint8_t>(GameType::Animals), 20, 5);
  const std::string id = t->session_id;
  fx.svc.get_frame(id);
  const auto gt = *fx.svc.ground_truth(id);
  int answers = 0;
  for (const auto& o : gt.objects) {
    if (!o.is_answer) continue;
    ++answers;
    auto truth = *fx.svc.ground_truth(id);
    auto c = fx.svc.post_event(id, EventKind::Click, center_of(truth.objects[static_cast<size_t>(o.id)]), 0);
    ASSERT_TRUE(c);
    fx.clock->advance(0.3);
    const SubTarget& st = truth.target.sub_targets[static_cast<size_t>(*o.bound_target)];
    auto d = fx.svc.post_event(id, EventKind::Drop, st.centroid, 0);
    ASSERT_TRUE(d);
    EXPECT_EQ(d->outcome, EventOutcome::Star);
    EXPECT_EQ(d->status, answers == 3 ? SessionStatus::Complete : SessionStatus::InProgress);
  }
  EXPECT_EQ(fx.svc.get_frame(id)->status, SessionStatus::Complete);
  EXPECT_EQ(fx.svc.post_event(id, EventKind::Click, {1, 1}, 0).error(), WireError::SessionTerminal);
}

TEST(Service, DropWithoutClickIsInvalidSequence) {
  Fixture fx;
  auto t = fx.svc.create_session(0, 20, 4);
  fx.svc.get_frame(t->session_id);
  EXPECT_EQ(fx.svc.post_event(t->session_id, EventKind::Drop, {300, 60}, 0).error(), WireError::InvalidSequence);
  EXPECT_EQ(fx.svc.post_event(t->session_id, EventKind::Click, {400, 60}, 0).error(), WireError::OutOfBounds);
  EXPECT_EQ(fx.svc.post_event(t->session_id, EventKind::Click, {300, 60}, 0).error(), WireError::NoObjectAtPoint);
}

TEST(Service, WrongDropsPastCapLockOut) {
  Fixture fx;
  auto t = fx.svc.create_session(static_cast<uint8_t>(GameType::Ships), 20, 4);
  const std::string id = t->session_id;
  fx.svc.get_frame(id);
  int noise = -1;
  for (const auto& o : fx.svc.ground_truth(id)->objects)
    if (!o.is_answer) noise = o.id;
  for (int i = 0; i < 3; ++i) {
    const auto truth = *fx.svc.ground_truth(id);
    ASSERT_TRUE(fx.svc.post_event(id, EventKind::Click, center_of(truth.objects[static_cast<size_t>(noise)]), 0));
    auto d = fx.svc.post_event(id, EventKind::Drop, truth.target.sub_targets[0].centroid, 0);
    ASSERT_TRUE(d);
    EXPECT_EQ(d->outcome, EventOutcome::Cross);
  }
  EXPECT_EQ(fx.svc.post_event(id, EventKind::Poll, {0, 0}, 0)->status, SessionStatus::LockedOut);
  EXPECT_EQ(fx.svc.get_frame(id)->status, SessionStatus::LockedOut);
}

TEST(Service, GroundTruthHiddenUnlessEnabled) {
  auto clock = std::make_shared<ManualClock>();
  ChallengeService svc(ServiceConfig{}, clock);
  auto t = svc.create_session(0, 20, 4);
  EXPECT_FALSE(svc.ground_truth(t->session_id).has_value());
}

TEST(Service, AnswerVariantOverrideApplies) {
  ServiceConfig cfg;
  cfg.answer_variant = 2;
  Fixture fx(cfg);
  auto t = fx.svc.create_session(0, 20, 4);
  EXPECT_EQ(fx.svc.session_config(t->session_id)->answer_variant, 2);
}

TEST(Embedded, WireSourceDrivesSessionInSimulatedTime) {
  EmbeddedService emb;
  auto& src = emb.source();
  ASSERT_TRUE(src.start(GameType::Parking, 40, 4));
  auto first = src.observe();
  ASSERT_TRUE(first);
  src.wait(0.5);
  auto second = src.observe();
  ASSERT_TRUE(second);
  EXPECT_EQ(second->frame_index, 20u);
  EXPECT_DOUBLE_EQ(src.now(), 0.5);
}
