#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "dcg/assets.hpp"
#include "dcg/engine.hpp"

using namespace dcg;

namespace {

int dominant_code(const Sprite& s) {
  const Histogram h = s.histogram();
  return static_cast<int>(std::max_element(h.begin(), h.end()) - h.begin());
}

// Half the L1 distance between normalised histograms, written out independently.
double l1_half(const Histogram& a, const Histogram& b) {
  double sa = 0, sb = 0;
  for (int i = 0; i < kCodeCount; ++i) {
    sa += a[i];
    sb += b[i];
  }
  double d = 0;
  for (int i = 0; i < kCodeCount; ++i) d += std::abs(a[i] / sa - b[i] / sb);
  return d / 2;
}

}  // namespace

TEST(Layout, AnswerMultiplicityPerGame) {
  const std::pair<GameType, int> expected[] = {
      {GameType::Ships, 1}, {GameType::Shapes, 2}, {GameType::Animals, 3}, {GameType::Parking, 1}};
  for (auto [game, r] : expected)
    for (int n : kAllowedObjectCounts)
      for (uint64_t seed = 0; seed < 20; ++seed) {
        const auto layout = generate_layout(game, n, seed);
        ASSERT_EQ(static_cast<int>(layout.objects.size()), n);
        const auto answers = std::count_if(layout.objects.begin(), layout.objects.end(),
                                           [](const PlacedSprite& p) { return p.sub_target.has_value(); });
        EXPECT_EQ(answers, r) << to_string(game);
        std::set<int> targets;
        for (const auto& p : layout.objects)
          if (p.sub_target) targets.insert(*p.sub_target);
        EXPECT_EQ(static_cast<int>(targets.size()), static_cast<int>(layout.spec.sub_targets.size()));
      }
}

TEST(Layout, ShipsFourObjectsHasOneShipAndThreeNoise) {
  const auto layout = generate_layout(GameType::Ships, 4, 5);
  int ships = 0;
  for (const auto& p : layout.objects)
    if (p.sprite.class_id == 0) ++ships;
  EXPECT_EQ(ships, 1);
}

TEST(Layout, ParkingHasSingleEmptyTarget) {
  const auto layout = generate_layout(GameType::Parking, 5, 1);
  EXPECT_TRUE(layout.spec.empty_target);
  ASSERT_EQ(layout.spec.sub_targets.size(), 1u);
  EXPECT_FALSE(layout.spec.sub_targets[0].marker_class.has_value());
}

TEST(Layout, DominantCodesDistinctWithinInstance) {
  for (GameType game : kAllGames)
    for (int n : kAllowedObjectCounts)
      for (uint64_t seed = 0; seed < 10; ++seed) {
        const auto layout = generate_layout(game, n, seed);
        std::set<int> codes;
        for (const auto& p : layout.objects) codes.insert(dominant_code(p.sprite));
        for (const auto& st : layout.spec.sub_targets)
          if (st.marker_class) codes.insert(dominant_code(make_sprite(game_art(game).find(*st.marker_class))));
        const size_t markers = std::count_if(layout.spec.sub_targets.begin(), layout.spec.sub_targets.end(),
                                             [](const SubTargetSlot& s) { return s.marker_class.has_value(); });
        EXPECT_EQ(codes.size(), layout.objects.size() + markers);
      }
}

TEST(Layout, SpriteCodesNeverAppearInScenery) {
  for (GameType game : kAllGames) {
    const auto& art = game_art(game);
    const auto bg = art.background_codes();
    for (const auto& cls : art.classes) {
      if (cls.role == SpriteRole::TargetMarker) continue;
      for (int v = 0; v < 6; ++v) {
        const Histogram h = make_sprite(cls, v).histogram();
        for (uint8_t code : bg) EXPECT_EQ(h[code], 0u) << cls.name << " variant " << v;
      }
    }
  }
}

TEST(Layout, SpritesAreFourteenToTwentyTwoPixelsAcross) {
  for (GameType game : kAllGames)
    for (const auto& cls : game_art(game).classes) {
      if (cls.role == SpriteRole::TargetMarker) continue;
      for (int v = 0; v < 4; ++v) {
        const Sprite s = make_sprite(cls, v);
        const int across = std::max(s.width, s.height);
        EXPECT_GE(across, 14) << cls.name;
        EXPECT_LE(across, 22) << cls.name;
        EXPECT_GE(s.area(), 16) << cls.name;
      }
    }
}

TEST(Layout, SameSeedSameLayout) {
  for (GameType game : kAllGames) {
    const auto a = generate_layout(game, 6, 99);
    const auto b = generate_layout(game, 6, 99);
    EXPECT_EQ(a.background, b.background);
    ASSERT_EQ(a.objects.size(), b.objects.size());
    for (size_t i = 0; i < a.objects.size(); ++i) {
      EXPECT_EQ(a.objects[i].sprite.class_id, b.objects[i].sprite.class_id);
      EXPECT_EQ(a.objects[i].top_left, b.objects[i].top_left);
    }
  }
}

TEST(Layout, SeedChangesSlotAssignment) {
  std::set<std::vector<int>> orders;
  for (uint64_t seed = 0; seed < 30; ++seed) {
    const auto l = generate_layout(GameType::Shapes, 5, seed);
    std::vector<int> ids;
    for (const auto& p : l.objects) ids.push_back(p.sprite.class_id);
    orders.insert(ids);
  }
  EXPECT_GT(orders.size(), 5u);
}

TEST(Layout, TargetRegionClearOfObjectsAndSubTargetsInside) {
  for (GameType game : kAllGames)
    for (int n : kAllowedObjectCounts) {
      const auto l = generate_layout(game, n, 4);
      EXPECT_FALSE(l.spec.target_region.intersects(l.spec.moving_area));
      for (const auto& st : l.spec.sub_targets) {
        EXPECT_TRUE(l.spec.target_region.contains(st.bbox));
        EXPECT_TRUE(st.bbox.contains(st.centroid));
      }
      for (const auto& p : l.objects) {
        const Rect box = Rect::from_size(p.top_left.x, p.top_left.y, p.sprite.width, p.sprite.height);
        EXPECT_TRUE(l.spec.moving_area.contains(box));
        EXPECT_FALSE(box.intersects(l.spec.target_region));
      }
    }
}

TEST(Layout, TooSmallFrameIsRejected) {
  LayoutOptions opts;
  opts.width = 120;
  opts.height = 40;
  EXPECT_THROW(generate_layout(GameType::Ships, 6, 1, opts), LayoutError);
}

TEST(SpritePool, SingleVariantIsCanonical) {
  const auto pool = sprite_pool(GameType::Ships, 0, 1);
  ASSERT_EQ(pool.size(), 1u);
  const Sprite canonical = make_sprite(game_art(GameType::Ships).find(0));
  EXPECT_EQ(pool[0].mask, canonical.mask);
  EXPECT_EQ(pool[0].histogram(), canonical.histogram());
}

TEST(SpritePool, ZeroIsAnError) { EXPECT_THROW(sprite_pool(GameType::Ships, 0, 0), std::invalid_argument); }

TEST(SpritePool, VariantsDistinctFromEachOtherAndFromNoise) {
  for (GameType game : kAllGames) {
    const auto& art = game_art(game);
    for (const auto* answer : art.with_role(SpriteRole::Answer)) {
      const auto pool = sprite_pool(game, answer->class_id, 5);
      for (size_t i = 0; i < pool.size(); ++i) {
        EXPECT_EQ(dominant_code(pool[i]), dominant_code(pool[0]));
        for (size_t j = 0; j < i; ++j) EXPECT_GT(l1_half(pool[i].histogram(), pool[j].histogram()), 0.15);
        for (const auto* noise : art.with_role(SpriteRole::Noise))
          for (int v = 0; v < 3; ++v)
            EXPECT_GT(l1_half(pool[i].histogram(), make_sprite(*noise, v).histogram()), 0.15)
                << answer->name << " vs " << noise->name;
      }
    }
  }
}

TEST(Scenery, MatchesEngineBackground) {
  GameConfig cfg;
  cfg.game_type = GameType::Animals;
  cfg.seed = 3;
  GameSession s(cfg);
  const auto spec = layout_geometry(GameType::Animals, cfg.object_count, 360, 130);
  EXPECT_EQ(render_scenery(spec), s.background());
}
