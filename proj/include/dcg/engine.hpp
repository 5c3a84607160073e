#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "dcg/assets.hpp"
#include "dcg/expected.hpp"
#include "dcg/frame.hpp"
#include "dcg/geometry.hpp"
#include "dcg/rng.hpp"

namespace dcg {

enum class Direction : uint8_t { N = 0, NE, E, SE, S, SW, W, NW };

inline constexpr int kDirectionCount = 8;

constexpr Point displacement(Direction d) {
  constexpr std::array<Point, 8> table = {Point{0, -1}, Point{1, -1}, Point{1, 0},  Point{1, 1},
                                          Point{0, 1},  Point{-1, 1}, Point{-1, 0}, Point{-1, -1}};
  return table[static_cast<size_t>(d)];
}

inline constexpr std::array<int, 3> kAllowedFps = {10, 20, 40};
inline constexpr std::array<int, 3> kAllowedObjectCounts = {4, 5, 6};

struct Parameterization {
  int fps;
  int objects;
};

/// The five (fps, object count) pairs every game is played at.
inline constexpr std::array<Parameterization, 5> kCanonicalParams = {
    Parameterization{10, 4}, Parameterization{20, 4}, Parameterization{20, 5},
    Parameterization{20, 6}, Parameterization{40, 4}};

struct GameConfig {
  GameType game_type = GameType::Ships;
  int fps = 20;
  int object_count = 4;
  int frame_width = 360;
  int frame_height = 130;
  double timeout = 60.0;
  int drag_cap = 2;
  std::optional<int> hold_cap;  // frames; unlimited when empty
  uint64_t seed = 0;
  int answer_variant = 0;
  int noise_variant = 0;
  bool show_matched = true;

  int timeout_frames() const { return static_cast<int>(std::lround(timeout * fps)); }
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void validate_config(const GameConfig& c) {
  if (std::find(kAllowedFps.begin(), kAllowedFps.end(), c.fps) == kAllowedFps.end())
    throw ConfigError("fps must be 10, 20 or 40");
  if (std::find(kAllowedObjectCounts.begin(), kAllowedObjectCounts.end(), c.object_count) ==
      kAllowedObjectCounts.end())
    throw ConfigError("object count must be 4, 5 or 6");
  if (c.timeout <= 0) throw ConfigError("timeout must be positive");
  if (c.drag_cap < 0) throw ConfigError("drag cap must be non-negative");
  if (c.hold_cap && *c.hold_cap < 0) throw ConfigError("hold cap must be non-negative");
  if (c.answer_variant < 0 || c.noise_variant < 0) throw ConfigError("variant must be non-negative");
}

enum class SessionStatus : uint8_t { InProgress = 0, Complete = 1, TimedOut = 2, LockedOut = 3 };

constexpr std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::InProgress: return "in-progress";
    case SessionStatus::Complete: return "complete";
    case SessionStatus::TimedOut: return "timed-out";
    case SessionStatus::LockedOut: return "locked-out";
  }
  return "?";
}

struct ObjectState {
  int id = 0;
  std::shared_ptr<const Sprite> sprite;
  Point position;  // top-left
  Direction direction = Direction::N;
  bool is_answer = false;
  std::optional<int> bound_target;
  bool held = false;
  bool matched = false;
  int held_frames = 0;
  bool hold_expired = false;

  Rect bbox() const { return Rect::from_size(position.x, position.y, sprite->width, sprite->height); }
};

struct SubTarget {
  int id = 0;
  Point centroid;
  Rect bbox;
  int answer_class = 0;
};

struct TargetSpec {
  Rect region;
  std::vector<SubTarget> sub_targets;
  bool is_empty_target = false;
};

enum class FeedbackOutcome : uint8_t { Star = 1, Cross = 2 };

struct Feedback {
  FeedbackOutcome outcome = FeedbackOutcome::Cross;
  int object_id = 0;
  std::optional<int> sub_target_id;
};

enum class EngineError : uint8_t {
  NoObjectAtPoint,
  InvalidHandle,
  DropOutsideFrame,
  HoldCapExceeded,
  SessionFinished,
};

constexpr std::string_view to_string(EngineError e) {
  switch (e) {
    case EngineError::NoObjectAtPoint: return "no object at point";
    case EngineError::InvalidHandle: return "invalid drag handle";
    case EngineError::DropOutsideFrame: return "drop outside frame";
    case EngineError::HoldCapExceeded: return "hold cap exceeded";
    case EngineError::SessionFinished: return "session finished";
  }
  return "?";
}

struct DragHandle {
  int object_id = -1;
  uint64_t token = 0;
};

struct ObjectTruth {
  int id = 0;
  int class_id = 0;
  Rect bbox;
  std::vector<Point> pixels;
  bool is_answer = false;
  bool matched = false;
  std::optional<int> bound_target;
};

struct GroundTruth {
  Frame background;
  std::vector<ObjectTruth> objects;
  TargetSpec target;
};

/// One running game. Not thread-safe; one caller at a time.
class GameSession {
 public:
  explicit GameSession(const GameConfig& config) : config_(config) {
    validate_config(config_);
    LayoutOptions opts;
    opts.width = config_.frame_width;
    opts.height = config_.frame_height;
    opts.answer_variant = config_.answer_variant;
    opts.noise_variant = config_.noise_variant;
    GeneratedLayout layout = generate_layout(config_.game_type, config_.object_count, config_.seed, opts);
    moving_area_ = layout.spec.moving_area;
    target_.region = layout.spec.target_region;
    target_.is_empty_target = layout.spec.empty_target;
    for (const auto& st : layout.spec.sub_targets)
      target_.sub_targets.push_back({st.id, st.centroid, st.bbox, st.answer_class});
    background_ = std::make_shared<const Frame>(std::move(layout.background));
    Frame codes_only = *background_;
    codes_only.drop_rgb();
    background_codes_ = std::make_shared<const Frame>(std::move(codes_only));

    rng_ = Rng(derive_seed(config_.seed, 0x5e55));
    int id = 0;
    for (auto& placed : layout.objects) {
      ObjectState o;
      o.id = id++;
      o.sprite = std::make_shared<const Sprite>(std::move(placed.sprite));
      o.position = placed.top_left;
      o.is_answer = placed.sub_target.has_value();
      o.bound_target = placed.sub_target;
      o.direction = random_direction();
      objects_.push_back(std::move(o));
    }
    attempts_.assign(objects_.size(), 0);
  }

  const GameConfig& config() const { return config_; }
  const std::vector<ObjectState>& objects() const { return objects_; }
  const TargetSpec& target() const { return target_; }
  const Rect& moving_area() const { return moving_area_; }
  int frame_index() const { return frame_index_; }
  SessionStatus status() const { return status_; }
  bool finished() const { return status_ != SessionStatus::InProgress; }
  int attempts(int object_id) const { return attempts_.at(static_cast<size_t>(object_id)); }
  double elapsed_seconds() const { return static_cast<double>(frame_index_) / config_.fps; }
  std::optional<int> held_object() const { return held_; }

  /// Advances the simulation by one frame without rendering.
  void advance() {
    if (finished()) return;
    for (auto& o : objects_) {
      if (o.matched) continue;
      if (o.held) {
        ++o.held_frames;
        if (config_.hold_cap && o.held_frames > *config_.hold_cap) {
          o.held = false;
          o.hold_expired = true;
          o.held_frames = 0;
          o.direction = random_direction();
          held_.reset();
        }
        continue;
      }
      move_object(o);
    }
    ++frame_index_;
    if (frame_index_ >= config_.timeout_frames()) status_ = SessionStatus::TimedOut;
  }

  Frame step() {
    advance();
    return render();
  }

  /// Composites the scene. Codes only unless `with_rgb`.
  Frame render(bool with_rgb = false) const {
    Frame f = with_rgb ? *background_ : *background_codes_;
    if (config_.show_matched)
      for (const auto& o : objects_)
        if (o.matched) stamp_sprite(f, *o.sprite, matched_position(o));
    for (const auto& o : objects_)
      if (!o.matched) stamp_sprite(f, *o.sprite, o.position);
    return f;
  }

  const Frame& background() const { return *background_; }

  Expected<DragHandle, EngineError> begin_drag(Point p) {
    if (finished()) return unexpected(EngineError::SessionFinished);
    std::optional<int> hit;
    for (const auto& o : objects_)
      if (!o.matched && o.bbox().contains(p)) hit = o.id;  // later ids render on top
    if (!hit) return unexpected(EngineError::NoObjectAtPoint);
    if (held_) release(objects_[static_cast<size_t>(*held_)]);
    ObjectState& o = objects_[static_cast<size_t>(*hit)];
    o.held = true;
    o.held_frames = 0;
    o.hold_expired = false;
    held_ = o.id;
    return DragHandle{o.id, ++handle_token_};
  }

  Expected<Feedback, EngineError> drop(const DragHandle& h, Point p) {
    if (finished()) return unexpected(EngineError::SessionFinished);
    if (h.object_id < 0 || h.object_id >= static_cast<int>(objects_.size()) || h.token != handle_token_)
      return unexpected(EngineError::InvalidHandle);
    ObjectState& o = objects_[static_cast<size_t>(h.object_id)];
    if (!o.held) {
      if (o.hold_expired) {
        o.hold_expired = false;
        ++handle_token_;
        return unexpected(EngineError::HoldCapExceeded);
      }
      return unexpected(EngineError::InvalidHandle);
    }
    if (!Rect{0, 0, config_.frame_width, config_.frame_height}.contains(p))
      return unexpected(EngineError::DropOutsideFrame);

    o.held = false;
    o.held_frames = 0;
    held_.reset();
    ++handle_token_;
    Feedback fb;
    fb.object_id = o.id;
    if (o.is_answer && o.bound_target) {
      const SubTarget& st = sub_target(*o.bound_target);
      if (st.bbox.contains(p)) {
        o.matched = true;
        fb.outcome = FeedbackOutcome::Star;
        fb.sub_target_id = st.id;
        if (std::all_of(objects_.begin(), objects_.end(),
                        [](const ObjectState& x) { return !x.is_answer || x.matched; }))
          status_ = SessionStatus::Complete;
        return fb;
      }
    }
    for (const auto& st : target_.sub_targets)
      if (st.bbox.contains(p)) fb.sub_target_id = st.id;
    fb.outcome = FeedbackOutcome::Cross;
    int& a = attempts_[static_cast<size_t>(o.id)];
    ++a;
    o.direction = random_direction();
    if (a > config_.drag_cap) status_ = SessionStatus::LockedOut;
    return fb;
  }

  GroundTruth ground_truth() const {
    GroundTruth gt;
    gt.background = *background_;
    gt.target = target_;
    for (const auto& o : objects_) {
      ObjectTruth t;
      t.id = o.id;
      t.class_id = o.sprite->class_id;
      t.is_answer = o.is_answer;
      t.matched = o.matched;
      t.bound_target = o.bound_target;
      const Point at = o.matched ? matched_position(o) : o.position;
      t.bbox = Rect::from_size(at.x, at.y, o.sprite->width, o.sprite->height);
      for (int y = 0; y < o.sprite->height; ++y)
        for (int x = 0; x < o.sprite->width; ++x)
          if (o.sprite->opaque(x, y)) t.pixels.push_back({at.x + x, at.y + y});
      gt.objects.push_back(std::move(t));
    }
    return gt;
  }

  const SubTarget& sub_target(int id) const {
    for (const auto& st : target_.sub_targets)
      if (st.id == id) return st;
    throw std::out_of_range("unknown sub-target");
  }

  // Scene construction hooks for tests and experiments.
  void place_object(int id, Point top_left) { objects_.at(static_cast<size_t>(id)).position = top_left; }
  void set_direction(int id, Direction d) { objects_.at(static_cast<size_t>(id)).direction = d; }

  /// Where a matched object is drawn: centred on its sub-target.
  Point matched_position(const ObjectState& o) const {
    const SubTarget& st = sub_target(*o.bound_target);
    return {st.centroid.x - o.sprite->width / 2, st.centroid.y - o.sprite->height / 2};
  }

 private:
  Direction random_direction() { return static_cast<Direction>(rng_.below(kDirectionCount)); }

  bool collides(const ObjectState& o, Rect box) const {
    if (!moving_area_.contains(box)) return true;
    for (const auto& other : objects_) {
      if (other.id == o.id || other.matched) continue;
      if (box.intersects(other.bbox())) return true;
    }
    return false;
  }

  void move_object(ObjectState& o) {
    const Point d = displacement(o.direction);
    const Rect next = o.bbox().translated(d.x, d.y);
    if (!collides(o, next)) {
      o.position = {o.position.x + d.x, o.position.y + d.y};
      return;
    }
    // Blocked: stay put this frame and pick a direction that is free, if any.
    const int current = static_cast<int>(o.direction);
    for (int attempt = 0; attempt < 8; ++attempt) {
      int k = static_cast<int>(rng_.below(kDirectionCount - 1));
      if (k >= current) ++k;
      o.direction = static_cast<Direction>(k);
      const Point nd = displacement(o.direction);
      if (!collides(o, o.bbox().translated(nd.x, nd.y))) return;
    }
  }

  void release(ObjectState& o) {
    o.held = false;
    o.held_frames = 0;
    held_.reset();
  }

  GameConfig config_;
  Rect moving_area_;
  TargetSpec target_;
  std::shared_ptr<const Frame> background_;
  std::shared_ptr<const Frame> background_codes_;
  std::vector<ObjectState> objects_;
  std::vector<int> attempts_;
  Rng rng_;
  int frame_index_ = 0;
  SessionStatus status_ = SessionStatus::InProgress;
  std::optional<int> held_;
  uint64_t handle_token_ = 0;
};

inline GameSession new_game(const GameConfig& config) { return GameSession(config); }

}  // namespace dcg
