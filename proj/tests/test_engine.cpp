#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dcg/engine.hpp"

using namespace dcg;

namespace {

GameConfig config(GameType g, int fps = 20, int objects = 4, uint64_t seed = 1) {
  GameConfig c;
  c.game_type = g;
  c.fps = fps;
  c.object_count = objects;
  c.seed = seed;
  return c;
}

Point bbox_center(const ObjectState& o) { return o.bbox().center_pixel(); }

}  // namespace

TEST(Direction, CardinalAndDiagonalDisplacements) {
  for (int d = 0; d < kDirectionCount; ++d) {
    const Point p = displacement(static_cast<Direction>(d));
    const int manhattan = std::abs(p.x) + std::abs(p.y);
    EXPECT_EQ(std::abs(p.x) <= 1 && std::abs(p.y) <= 1, true);
    EXPECT_EQ(manhattan, d % 2 == 0 ? 1 : 2);
  }
  EXPECT_EQ(displacement(Direction::NE), (Point{1, -1}));
}

TEST(Direction, MeanDisplacementOverUniformDirections) {
  Rng rng(2024);
  const int n = 1'000'000;
  double total = 0;
  for (int i = 0; i < n; ++i) {
    const Point p = displacement(static_cast<Direction>(rng.below(8)));
    total += std::hypot(p.x, p.y);
  }
  const double mean = total / n;
  const double expected = (4.0 + 4.0 * std::sqrt(2.0)) / 8.0;
  EXPECT_NEAR(mean, expected, expected * 0.005);
  EXPECT_NEAR(expected, 1.207, 5e-4);
  for (int fps : kAllowedFps) EXPECT_NEAR(expected * fps, 12.07 * fps / 10, 0.01);
}

TEST(Config, RejectsNonCanonicalValues) {
  auto c = config(GameType::Ships);
  c.fps = 30;
  EXPECT_THROW(GameSession{c}, ConfigError);
  c = config(GameType::Ships);
  c.object_count = 7;
  EXPECT_THROW(GameSession{c}, ConfigError);
}

TEST(NewGame, ShapesHasTwoAnswers) {
  GameSession s(config(GameType::Shapes, 20, 4, 7));
  ASSERT_EQ(s.objects().size(), 4u);
  std::set<int> classes;
  for (const auto& o : s.objects())
    if (o.is_answer) classes.insert(o.sprite->class_id);
  EXPECT_EQ(classes, (std::set<int>{0, 1}));
}

TEST(NewGame, AnimalsSixObjectsBindsThreeSubTargets) {
  GameSession s(config(GameType::Animals, 20, 6, 1));
  std::set<int> bound;
  for (const auto& o : s.objects())
    if (o.is_answer) bound.insert(*o.bound_target);
  EXPECT_EQ(bound.size(), 3u);
}

TEST(Engine, DeterministicForSameSeed) {
  for (GameType g : kAllGames) {
    GameSession a(config(g, 40, 6, 77)), b(config(g, 40, 6, 77));
    for (int i = 0; i < 300; ++i) ASSERT_EQ(a.step(), b.step());
  }
}

TEST(Engine, CardinalMoveWithoutCollision) {
  GameSession s(config(GameType::Ships, 20, 4, 1));
  // Park every object far apart, then move object 0 east.
  for (int id = 1; id < 4; ++id) {
    s.place_object(id, {20 + 50 * id, 100});
    s.set_direction(id, Direction::S);
  }
  s.place_object(0, {100 - 50, 50});
  s.place_object(0, {30, 40});
  s.set_direction(0, Direction::E);
  s.advance();
  EXPECT_EQ(s.objects()[0].position, (Point{31, 40}));
  s.set_direction(0, Direction::NE);
  s.advance();
  EXPECT_EQ(s.objects()[0].position, (Point{32, 39}));
}

TEST(Engine, BlockedAtWallStaysAndRedrawsFromSeededStream) {
  GameSession s(config(GameType::Ships, 20, 4, 3));
  const Rect area = s.moving_area();
  const auto& o = s.objects()[0];
  s.place_object(0, {area.right - o.sprite->width, 60});
  s.set_direction(0, Direction::E);
  for (int id = 1; id < 4; ++id) s.place_object(id, {10 + 40 * (id - 1), 5});
  const Point before = s.objects()[0].position;
  s.advance();
  EXPECT_EQ(s.objects()[0].position, before);
  EXPECT_NE(s.objects()[0].direction, Direction::E);
  // The redraw must not keep pointing into the wall.
  const Point d = displacement(s.objects()[0].direction);
  EXPECT_LE(d.x, 0);
}

TEST(Engine, ObjectsNeverLeaveMovingAreaOrOverlap) {
  for (GameType g : kAllGames) {
    GameConfig c = config(g, 40, 6, 12);
    c.timeout = 1e9;
    GameSession s(c);
    for (int i = 0; i < 100000 / 4; ++i) {
      s.advance();
      const auto& objs = s.objects();
      for (size_t a = 0; a < objs.size(); ++a) {
        ASSERT_TRUE(s.moving_area().contains(objs[a].bbox()));
        for (size_t b = 0; b < a; ++b) ASSERT_FALSE(objs[a].bbox().intersects(objs[b].bbox()));
      }
    }
  }
}

TEST(Engine, PerFrameDisplacementIsOneOrDiagonal) {
  GameConfig c = config(GameType::Shapes, 20, 4, 5);
  c.timeout = 1e9;
  GameSession s(c);
  for (int i = 0; i < 5000; ++i) {
    std::vector<Point> before;
    for (const auto& o : s.objects()) before.push_back(o.position);
    s.advance();
    for (size_t k = 0; k < before.size(); ++k) {
      const int dx = std::abs(s.objects()[k].position.x - before[k].x);
      const int dy = std::abs(s.objects()[k].position.y - before[k].y);
      ASSERT_LE(dx, 1);
      ASSERT_LE(dy, 1);
    }
  }
}

TEST(Engine, TimesOutExactlyAtTimeoutFrames) {
  for (int fps : kAllowedFps) {
    GameSession s(config(GameType::Parking, fps, 4, 8));
    while (s.status() == SessionStatus::InProgress) s.advance();
    EXPECT_EQ(s.status(), SessionStatus::TimedOut);
    EXPECT_EQ(s.frame_index(), 60 * fps);
    const Frame last = s.render();
    EXPECT_EQ(s.step(), last);  // finished sessions are frozen
    EXPECT_EQ(s.frame_index(), 60 * fps);
  }
}

TEST(Engine, ClickOnBackgroundHitsNothing) {
  GameSession s(config(GameType::Ships));
  auto h = s.begin_drag(s.target().sub_targets[0].centroid);
  ASSERT_FALSE(h);
  EXPECT_EQ(h.error(), EngineError::NoObjectAtPoint);
}

TEST(Engine, OverlapClickPicksLaterRenderedObject) {
  GameSession s(config(GameType::Shapes, 20, 4, 2));
  s.place_object(0, {150, 50});
  s.place_object(3, {155, 55});
  auto h = s.begin_drag({158, 58});
  ASSERT_TRUE(h);
  EXPECT_EQ(h->object_id, 3);
}

TEST(Engine, ScriptedOracleCompletesWithoutCrosses) {
  for (GameType g : kAllGames)
    for (auto p : kCanonicalParams)
      for (uint64_t seed = 0; seed < 5; ++seed) {
        GameSession s(config(g, p.fps, p.objects, seed));
        s.advance();
        for (const auto& truth : s.ground_truth().objects) {
          if (!truth.is_answer) continue;
          const ObjectState& o = s.objects()[static_cast<size_t>(truth.id)];
          auto h = s.begin_drag(bbox_center(o));
          ASSERT_TRUE(h);
          ASSERT_EQ(h->object_id, truth.id);
          auto fb = s.drop(*h, s.sub_target(*truth.bound_target).centroid);
          ASSERT_TRUE(fb);
          EXPECT_EQ(fb->outcome, FeedbackOutcome::Star);
          s.advance();
        }
        EXPECT_EQ(s.status(), SessionStatus::Complete);
      }
}

TEST(Engine, RepeatedCrossesLockOut) {
  GameConfig c = config(GameType::Shapes, 20, 4, 9);
  GameSession s(c);
  int noise = -1;
  for (const auto& o : s.objects())
    if (!o.is_answer) noise = o.id;
  ASSERT_GE(noise, 0);
  for (int i = 0; i <= c.drag_cap; ++i) {
    ASSERT_EQ(s.status(), SessionStatus::InProgress);
    auto h = s.begin_drag(bbox_center(s.objects()[static_cast<size_t>(noise)]));
    ASSERT_TRUE(h);
    auto fb = s.drop(*h, s.target().sub_targets[0].centroid);
    ASSERT_TRUE(fb);
    EXPECT_EQ(fb->outcome, FeedbackOutcome::Cross);
    EXPECT_EQ(s.attempts(noise), i + 1);
  }
  EXPECT_EQ(s.status(), SessionStatus::LockedOut);
}

TEST(Engine, AnswerDroppedOnWrongSubTargetIsCross) {
  GameSession s(config(GameType::Animals, 20, 4, 4));
  for (const auto& o : s.objects()) {
    if (!o.is_answer) continue;
    const int wrong = (*o.bound_target + 1) % 3;
    auto h = s.begin_drag(bbox_center(o));
    auto fb = s.drop(*h, s.sub_target(wrong).centroid);
    EXPECT_EQ(fb->outcome, FeedbackOutcome::Cross);
    break;
  }
}

TEST(Engine, DropOutsideFrameKeepsHold) {
  GameSession s(config(GameType::Ships));
  auto h = s.begin_drag(bbox_center(s.objects()[1]));
  ASSERT_TRUE(h);
  auto fb = s.drop(*h, {400, 10});
  ASSERT_FALSE(fb);
  EXPECT_EQ(fb.error(), EngineError::DropOutsideFrame);
  EXPECT_TRUE(s.objects()[1].held);
  EXPECT_TRUE(s.drop(*h, {5, 5}));
}

TEST(Engine, HeldObjectsDoNotMoveAndHoldCapReleases) {
  GameConfig c = config(GameType::Ships);
  c.hold_cap = 5;
  GameSession s(c);
  auto h = s.begin_drag(bbox_center(s.objects()[2]));
  ASSERT_TRUE(h);
  const Point at = s.objects()[2].position;
  for (int i = 0; i < 5; ++i) s.advance();
  EXPECT_EQ(s.objects()[2].position, at);
  EXPECT_TRUE(s.objects()[2].held);
  s.advance();
  EXPECT_FALSE(s.objects()[2].held);
  auto fb = s.drop(*h, s.target().sub_targets[0].centroid);
  ASSERT_FALSE(fb);
  EXPECT_EQ(fb.error(), EngineError::HoldCapExceeded);
  EXPECT_EQ(s.attempts(2), 0);
}

TEST(Engine, StaleHandleIsInvalid) {
  GameSession s(config(GameType::Ships));
  auto h1 = s.begin_drag(bbox_center(s.objects()[0]));
  auto h2 = s.begin_drag(bbox_center(s.objects()[1]));
  ASSERT_TRUE(h1 && h2);
  EXPECT_FALSE(s.objects()[0].held);
  auto fb = s.drop(*h1, {10, 10});
  ASSERT_FALSE(fb);
  EXPECT_EQ(fb.error(), EngineError::InvalidHandle);
}

TEST(GroundTruth, BackgroundIsObjectFreeRender) {
  GameSession s(config(GameType::Shapes, 20, 5, 3));
  const auto gt = s.ground_truth();
  const auto spec = layout_geometry(GameType::Shapes, 5, 360, 130);
  EXPECT_EQ(gt.background, render_scenery(spec));
}

TEST(GroundTruth, MasksMatchSpriteAreaAndAvoidTarget) {
  for (GameType g : kAllGames) {
    GameSession s(config(g, 20, 6, 5));
    const auto gt = s.ground_truth();
    for (const auto& t : gt.objects) {
      EXPECT_EQ(static_cast<int>(t.pixels.size()), s.objects()[static_cast<size_t>(t.id)].sprite->area());
      for (const Point& p : t.pixels) EXPECT_FALSE(gt.target.region.contains(p));
    }
  }
}

TEST(Render, TargetDiffersFromMovingArea) {
  for (GameType g : kAllGames) {
    GameSession s(config(g));
    const Frame f = s.render();
    const Rect t = s.target().region;
    const Rect m = s.moving_area();
    // Parking reuses the water inside its dock; its outline still differs.
    bool differs = false;
    for (int y = t.top; y < t.bottom && !differs; ++y)
      for (int x = t.left; x < t.right; ++x)
        if (f.code(x, y) != f.code(m.left + 1, m.bottom - 1)) {
          differs = true;
          break;
        }
    EXPECT_TRUE(differs) << to_string(g);
  }
}

TEST(Render, CompleteSessionShowsAnswersAtSubTargets) {
  GameSession s(config(GameType::Animals, 20, 4, 6));
  for (const auto& o : s.objects()) {
    if (!o.is_answer) continue;
    auto h = s.begin_drag(bbox_center(o));
    s.drop(*h, s.sub_target(*o.bound_target).centroid);
  }
  ASSERT_EQ(s.status(), SessionStatus::Complete);
  const Frame f = s.render();
  for (const auto& t : s.ground_truth().objects) {
    if (!t.is_answer) continue;
    EXPECT_TRUE(s.sub_target(*t.bound_target).bbox.contains(t.bbox));
    for (const Point& p : t.pixels) EXPECT_NE(f.code(p), s.background().code(p));
  }
}
