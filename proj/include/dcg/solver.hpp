#pragma once

#include <algorithm>
#include <cmath>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string_view>
#include <vector>

#include "dcg/bytes.hpp"
#include "dcg/driver.hpp"
#include "dcg/expected.hpp"
#include "dcg/guess.hpp"
#include "dcg/rng.hpp"
#include "dcg/vision.hpp"

namespace dcg {

struct SolverParams {
  VisionParams vision;
  TargetMethod target_method = TargetMethod::MBR;
  double action_latency = 0.05;  // observation to click
  double match_latency = 0.3;    // time to decide on a match, jittered
  double match_jitter = 0.5;     // +- fraction of match_latency
  double drag_time = 0.2;
  double settle = 0.1;
  int attempts_per_object = 2;  // probe tries per object per session
  double identify_threshold = 0.95;
  double match_threshold = kMatchThreshold;
  int parked_margin = 24;
  int max_probe_sessions = 40;
  int observe_retries = 20;
  bool continuous_learning = true;
  uint64_t seed = 1;
};

enum class SolverError : uint8_t { TargetDetectionFailed, ProbeExhausted, UnknownChallenge, MatchFailed, Transport };

constexpr std::string_view to_string(SolverError e) {
  switch (e) {
    case SolverError::TargetDetectionFailed: return "target detection failed";
    case SolverError::ProbeExhausted: return "probe exhausted";
    case SolverError::UnknownChallenge: return "unknown challenge";
    case SolverError::MatchFailed: return "match failed";
    case SolverError::Transport: return "transport error";
  }
  return "?";
}

struct Binding {
  Histogram histogram{};
  int area = 0;
  Point centroid;
};

struct NoiseSignature {
  Histogram histogram{};
  int area = 0;
};

/// Everything learned about one game: what it looks like, where its target is
/// and which objects go where.
struct KnowledgeRecord {
  uint64_t game_key = 0;
  Frame background;
  TargetEstimate target;
  Rect moving_zone;  // union of observed foreground MBRs
  std::array<Point, 9> probe_blocks{};
  std::vector<Binding> bindings;
  std::vector<NoiseSignature> noise;

  std::vector<Point> target_centroids() const {
    std::vector<Point> out;
    for (const auto& b : bindings)
      if (std::find(out.begin(), out.end(), b.centroid) == out.end()) out.push_back(b.centroid);
    return out;
  }
};

/// Centres of a 3x3 split of `r`, row-major.
inline std::array<Point, 9> block_centroids(const Rect& r) {
  std::array<Point, 9> out{};
  for (int row = 0; row < 3; ++row)
    for (int col = 0; col < 3; ++col)
      out[static_cast<size_t>(row * 3 + col)] =
          PointF{r.left + (2 * col + 1) * r.width() / 6.0 - 0.5, r.top + (2 * row + 1) * r.height() / 6.0 - 0.5}
              .rounded();
  return out;
}

inline uint64_t background_key(const Frame& bg) {
  ByteWriter w;
  w.u16(static_cast<uint16_t>(bg.width()));
  w.u16(static_cast<uint16_t>(bg.height()));
  w.raw(bg.codes());
  return fnv1a64(w.bytes());
}

/// Fraction of pixels inside `region` where the two backgrounds agree.
inline double region_agreement(const Frame& a, const Frame& b, const Rect& region) {
  if (a.width() != b.width() || a.height() != b.height()) return 0.0;
  const Rect r = region.intersected(a.bounds());
  if (r.empty()) return 0.0;
  int same = 0;
  for (int y = r.top; y < r.bottom; ++y)
    for (int x = r.left; x < r.right; ++x) same += a.code(x, y) == b.code(x, y);
  return static_cast<double>(same) / r.area();
}

// --- DCGD1 dictionary file ------------------------------------------------
//
//   "DCGD1" | u32 record count | records...
//   record: u64 game_key | blob DCGF background | u8 target method |
//           u16 x4 target rect (l,t,r,b) | u16 x2 target centre |
//           u16 x4 moving zone | 9 x (u16 x, u16 y) probe blocks |
//           u32 n | n x (64 x u32 histogram, u32 area, u16 x, u16 y) bindings |
//           u32 m | m x (64 x u32 histogram, u32 area) noise signatures
//
// Little-endian throughout.

inline constexpr std::string_view kDictMagic = "DCGD1";

namespace detail {

inline void write_rect(ByteWriter& w, const Rect& r) {
  w.u16(static_cast<uint16_t>(r.left));
  w.u16(static_cast<uint16_t>(r.top));
  w.u16(static_cast<uint16_t>(r.right));
  w.u16(static_cast<uint16_t>(r.bottom));
}
inline Rect read_rect(ByteReader& r) {
  Rect out;
  out.left = r.u16();
  out.top = r.u16();
  out.right = r.u16();
  out.bottom = r.u16();
  return out;
}
inline void write_point(ByteWriter& w, Point p) {
  w.u16(static_cast<uint16_t>(p.x));
  w.u16(static_cast<uint16_t>(p.y));
}
inline Point read_point(ByteReader& r) {
  const int x = r.u16();
  const int y = r.u16();
  return {x, y};
}
inline void write_histogram(ByteWriter& w, const Histogram& h) {
  for (uint32_t v : h) w.u32(v);
}
inline Histogram read_histogram(ByteReader& r) {
  Histogram h{};
  for (auto& v : h) v = r.u32();
  return h;
}

}  // namespace detail

/// Thread-safe store of knowledge records.
class Dictionary {
 public:
  Dictionary() = default;
  Dictionary(const Dictionary& o) : recs_(o.records()) {}
  Dictionary& operator=(const Dictionary& o) {
    if (this != &o) {
      auto copy = o.records();
      std::unique_lock lock(mu_);
      recs_ = std::move(copy);
    }
    return *this;
  }

  size_t size() const {
    std::shared_lock lock(mu_);
    return recs_.size();
  }
  bool empty() const { return size() == 0; }

  std::vector<KnowledgeRecord> records() const {
    std::shared_lock lock(mu_);
    return recs_;
  }

  /// Record whose stored background agrees with `bg` over its target region.
  std::optional<KnowledgeRecord> identify(const Frame& bg, double threshold = 0.95) const {
    std::shared_lock lock(mu_);
    const KnowledgeRecord* best = nullptr;
    double best_rate = -1;
    for (const auto& rec : recs_) {
      const double rate = region_agreement(bg, rec.background, rec.target.region);
      if (rate >= threshold && rate > best_rate) {
        best = &rec;
        best_rate = rate;
      }
    }
    if (!best) return std::nullopt;
    return *best;
  }

  /// Replaces the record with the same key, or the record for the same game,
  /// or appends.
  void upsert(KnowledgeRecord rec, double threshold = 0.95) {
    std::unique_lock lock(mu_);
    for (auto& existing : recs_)
      if (existing.game_key == rec.game_key) {
        existing = std::move(rec);
        return;
      }
    for (auto& existing : recs_)
      if (region_agreement(rec.background, existing.background, existing.target.region) >= threshold) {
        existing = std::move(rec);
        return;
      }
    recs_.push_back(std::move(rec));
  }

  std::vector<uint8_t> serialize() const {
    std::shared_lock lock(mu_);
    ByteWriter w;
    w.raw(kDictMagic);
    w.u32(static_cast<uint32_t>(recs_.size()));
    for (const auto& rec : recs_) {
      w.u64(rec.game_key);
      w.blob(encode_dcgf(rec.background));
      w.u8(static_cast<uint8_t>(rec.target.method));
      detail::write_rect(w, rec.target.region);
      detail::write_point(w, rec.target.center);
      detail::write_rect(w, rec.moving_zone);
      for (const Point& p : rec.probe_blocks) detail::write_point(w, p);
      w.u32(static_cast<uint32_t>(rec.bindings.size()));
      for (const auto& b : rec.bindings) {
        detail::write_histogram(w, b.histogram);
        w.u32(static_cast<uint32_t>(b.area));
        detail::write_point(w, b.centroid);
      }
      w.u32(static_cast<uint32_t>(rec.noise.size()));
      for (const auto& n : rec.noise) {
        detail::write_histogram(w, n.histogram);
        w.u32(static_cast<uint32_t>(n.area));
      }
    }
    return w.take();
  }

  static Dictionary deserialize(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_magic(kDictMagic);
    const uint32_t count = r.u32();
    Dictionary d;
    for (uint32_t i = 0; i < count; ++i) {
      KnowledgeRecord rec;
      rec.game_key = r.u64();
      rec.background = decode_dcgf(r.blob());
      const uint8_t method = r.u8();
      if (method > 2) throw FormatError("bad target method");
      rec.target.method = static_cast<TargetMethod>(method);
      rec.target.region = detail::read_rect(r);
      rec.target.center = detail::read_point(r);
      rec.moving_zone = detail::read_rect(r);
      for (Point& p : rec.probe_blocks) p = detail::read_point(r);
      const uint32_t nb = r.u32();
      for (uint32_t k = 0; k < nb; ++k) {
        Binding b;
        b.histogram = detail::read_histogram(r);
        b.area = static_cast<int>(r.u32());
        b.centroid = detail::read_point(r);
        rec.bindings.push_back(b);
      }
      const uint32_t nn = r.u32();
      for (uint32_t k = 0; k < nn; ++k) {
        NoiseSignature n;
        n.histogram = detail::read_histogram(r);
        n.area = static_cast<int>(r.u32());
        rec.noise.push_back(n);
      }
      d.recs_.push_back(std::move(rec));
    }
    if (r.remaining() != 0) throw FormatError("trailing bytes in dictionary");
    return d;
  }

  void save(const std::filesystem::path& path) const { write_file_bytes(path, serialize()); }
  static Dictionary load(const std::filesystem::path& path) { return deserialize(read_file_bytes(path)); }

 private:
  mutable std::shared_mutex mu_;
  std::vector<KnowledgeRecord> recs_;
};

// --- Perception helpers ------------------------------------------------------

struct Scene {
  std::vector<ForegroundObject> moving;  // largest first
  std::vector<ForegroundObject> parked;
  int moving_area = 0;
  SessionStatus status = SessionStatus::InProgress;
  uint32_t frame_index = 0;
};

/// Splits the foreground into moving objects and objects parked in the target.
inline Scene analyze_scene(const Observation& obs, const KnowledgeRecord& rec, const SolverParams& p) {
  Scene s;
  s.status = obs.status;
  s.frame_index = obs.frame_index;
  const Rect zone{rec.moving_zone.left - p.parked_margin, rec.moving_zone.top - p.parked_margin,
                  rec.moving_zone.right + p.parked_margin, rec.moving_zone.bottom + p.parked_margin};
  for (auto& o : extract_foreground(obs.frame, rec.background, p.vision)) {
    if (!o.bbox.intersects(zone) && rec.target.region.intersects(o.bbox))
      s.parked.push_back(std::move(o));
    else
      s.moving.push_back(std::move(o));
  }
  std::stable_sort(s.moving.begin(), s.moving.end(), [](const ForegroundObject& a, const ForegroundObject& b) {
    if (a.area != b.area) return a.area > b.area;
    if (a.bbox.left != b.bbox.left) return a.bbox.left < b.bbox.left;
    return a.bbox.top < b.bbox.top;
  });
  s.moving_area = total_area(s.moving);
  return s;
}

/// Pixel of `obj` nearest its bbox centre that keeps clear of other objects' boxes.
inline std::optional<Point> click_point(const ForegroundObject& obj, const std::vector<ForegroundObject>& all,
                                        int clearance = 3) {
  const PointF c = obj.bbox.center();
  std::optional<Point> best;
  double best_d = 1e18;
  for (const Point& px : obj.pixels) {
    bool blocked = false;
    for (const auto& other : all) {
      if (&other == &obj || other.bbox == obj.bbox) continue;
      const Rect grown{other.bbox.left - clearance, other.bbox.top - clearance, other.bbox.right + clearance,
                       other.bbox.bottom + clearance};
      if (grown.contains(px)) {
        blocked = true;
        break;
      }
    }
    if (blocked) continue;
    const double d = (px.x + 0.5 - c.x) * (px.x + 0.5 - c.x) + (px.y + 0.5 - c.y) * (px.y + 0.5 - c.y);
    if (d < best_d) {
      best_d = d;
      best = px;
    }
  }
  return best;
}

struct LearnedScene {
  Frame background;
  std::vector<Frame> masks;
  int expected_objects = 0;
  Rect moving_zone;
};

/// Watches `learn_frames` frames at the sampling interval and learns the background.
inline Expected<LearnedScene, SolverError> learn_scene(ChallengeSource& src, const SolverParams& p) {
  std::vector<Frame> frames;
  for (int i = 0; i < p.vision.learn_frames; ++i) {
    auto obs = src.observe();
    if (!obs) return unexpected(SolverError::Transport);
    frames.push_back(std::move(obs->frame));
    if (i + 1 < p.vision.learn_frames) src.wait(p.vision.sample_interval);
  }
  LearnedScene out;
  out.background = learn_background(frames).codes;
  std::optional<Rect> zone;
  for (int idx : sample_indices(p.vision.learn_frames, p.vision.object_frames)) {
    const auto objs = extract_foreground(frames[static_cast<size_t>(idx)], out.background, p.vision);
    out.expected_objects = std::max(out.expected_objects, static_cast<int>(objs.size()));
    for (const auto& o : objs) zone = zone ? zone->united(o.bbox) : o.bbox;
    out.masks.push_back(component_mask(objs, out.background.width(), out.background.height()));
  }
  out.moving_zone = zone.value_or(Rect{});
  return out;
}

inline Expected<TargetEstimate, VisionError> detect_target(const LearnedScene& s, const SolverParams& p) {
  switch (p.target_method) {
    case TargetMethod::MBR: return detect_target_mbr(s.background, s.masks);
    case TargetMethod::Edge: return detect_target_edge(s.background, p.vision);
    case TargetMethod::Exclusion: return detect_target_exclusion(s.background, s.masks);
  }
  return unexpected(VisionError::NoForeground);
}

namespace detail {

struct DragOutcome {
  bool clicked = false;
  bool matched = false;
  SessionStatus status = SessionStatus::InProgress;
};

/// Solver-side interaction primitives shared by probing, attacking and learning.
class Actor {
 public:
  Actor(ChallengeSource& src, const KnowledgeRecord& rec, const SolverParams& p, Rng& rng)
      : src_(src), rec_(rec), p_(p), rng_(rng) {}

  std::optional<Scene> observe() {
    auto obs = src_.observe();
    if (!obs) return std::nullopt;
    last_frame_index = obs->frame_index;
    return analyze_scene(*obs, rec_, p_);
  }

  /// Observes until at least `expected` moving objects are visible (merged
  /// objects hide each other), giving up after a few retries.
  std::optional<Scene> stable_scene(int expected) {
    std::optional<Scene> s;
    for (int i = 0; i <= p_.observe_retries; ++i) {
      s = observe();
      if (!s || s->status != SessionStatus::InProgress) return s;
      if (static_cast<int>(s->moving.size()) >= expected) return s;
      src_.wait(p_.settle / 2);
    }
    return s;
  }

  /// Click-and-hold `obj`, wait for the match decision, drop at `target`, and
  /// decide from the foreground area whether the object was accepted.
  DragOutcome drag(const Scene& scene, const ForegroundObject& obj, Point target) {
    DragOutcome out;
    const auto at = click_point(obj, scene.moving);
    if (!at) return out;
    src_.wait(p_.action_latency);
    auto c = src_.click(*at);
    if (!c) {
      if (c.error() == WireError::SessionTerminal) out.status = SessionStatus::TimedOut;
      return out;
    }
    out.clicked = true;
    const double jitter = 1.0 + p_.match_jitter * (2.0 * rng_.uniform01() - 1.0);
    src_.wait(p_.match_latency * jitter + p_.drag_time);
    src_.drop(target);
    int post_area = -1;
    for (int k = 0; k < 2; ++k) {
      src_.wait(p_.settle);
      auto s = observe();
      if (!s) break;
      post_area = std::max(post_area, s->moving_area);
      out.status = s->status;
    }
    out.matched = post_area >= 0 && scene.moving_area - post_area >= obj.area / 2;
    return out;
  }

  unsigned last_frame_index = 0;

 private:
  ChallengeSource& src_;
  const KnowledgeRecord& rec_;
  const SolverParams& p_;
  Rng& rng_;
};

inline std::optional<size_t> best_match(const Histogram& h, const std::vector<Histogram>& pool, double threshold) {
  std::optional<size_t> best;
  double best_d = threshold;
  for (size_t i = 0; i < pool.size(); ++i) {
    const double d = histogram_distance(h, pool[i]);
    if (d <= best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline bool is_known_noise(const KnowledgeRecord& rec, const Histogram& h, double threshold) {
  for (const auto& n : rec.noise)
    if (histogram_distance(h, n.histogram) <= threshold) return true;
  return false;
}

// Visits blocks so that the first three cover every row and column.
inline constexpr std::array<int, 9> kBlockOrder = {0, 8, 4, 2, 6, 1, 3, 5, 7};

}  // namespace detail

// --- Probing -----------------------------------------------------------------

struct ProbeReport {
  KnowledgeRecord record;
  int drags = 0;
  int sessions = 0;
  bool completed = false;
  double sim_time = 0;
  double learn_time = 0;
};

/// Learns a game from scratch by dragging objects to the nine target blocks and
/// watching for the foreground to shrink. Spans sessions when caps interrupt.
inline Expected<ProbeReport, SolverError> probe_game(ChallengeSource& src, GameType game, int fps, int objects,
                                                     const SolverParams& p = {}) {
  struct Candidate {
    Histogram histogram{};
    int area = 0;
    uint16_t tried = 0;
    int session_tries = 0;
    bool noise = false;
  };
  Rng rng(derive_seed(p.seed, 0x9e0be));
  ProbeReport report;
  std::vector<Candidate> candidates;
  int expected_objects = 0;
  const double t0 = src.now();

  for (int session = 0; session < p.max_probe_sessions; ++session) {
    if (!src.start(game, fps, objects)) return unexpected(SolverError::Transport);
    ++report.sessions;
    if (session == 0) {
      auto learned = learn_scene(src, p);
      if (!learned) return unexpected(learned.error());
      auto target = detect_target(*learned, p);
      if (!target) return unexpected(SolverError::TargetDetectionFailed);
      report.record.background = learned->background;
      report.record.game_key = background_key(learned->background);
      report.record.target = *target;
      report.record.moving_zone = learned->moving_zone;
      report.record.probe_blocks = block_centroids(trim_uniform_edges(learned->background, target->region));
      expected_objects = learned->expected_objects;
      report.learn_time = src.now() - t0;
    }
    KnowledgeRecord& rec = report.record;
    detail::Actor actor(src, rec, p, rng);
    for (auto& c : candidates) c.session_tries = 0;
    std::set<std::pair<int, int>> satisfied;
    std::map<size_t, int> binding_failures;
    int matched = 0;
    int merged_waits = 0;
    bool stuck = false;
    for (int guard = 0; guard < 400; ++guard) {
      auto scene = actor.stable_scene(expected_objects - matched);
      if (!scene || scene->status != SessionStatus::InProgress) break;

      // Objects we already know go straight to their block.
      const ForegroundObject* pick = nullptr;
      Point drop_at;
      std::optional<size_t> binding_idx;
      std::optional<size_t> cand_idx;
      int block = -1;
      for (const auto& obj : scene->moving) {
        for (size_t b = 0; b < rec.bindings.size(); ++b) {
          const auto& bind = rec.bindings[b];
          if (satisfied.count({bind.centroid.x, bind.centroid.y}) || binding_failures[b] >= p.attempts_per_object)
            continue;
          if (histogram_distance(obj.histogram, bind.histogram) <= p.match_threshold) {
            pick = &obj;
            drop_at = bind.centroid;
            binding_idx = b;
            break;
          }
        }
        if (pick) break;
      }

      // Touching objects show up as one blob; never learn from such a frame.
      const bool merged = static_cast<int>(scene->moving.size()) < expected_objects - matched;
      if (!pick && merged && ++merged_waits <= p.observe_retries) {
        src.wait(p.settle);
        continue;
      }
      if (!pick && !merged) {
        merged_waits = 0;
        // Breadth-first over unknown objects: fewest tries this session first.
        int best_tries = 1 << 30;
        for (const auto& obj : scene->moving) {
          bool known = false;
          for (const auto& bind : rec.bindings)
            known |= histogram_distance(obj.histogram, bind.histogram) <= p.match_threshold;
          if (known) continue;
          std::vector<Histogram> hs;
          for (const auto& c : candidates) hs.push_back(c.histogram);
          auto ci = detail::best_match(obj.histogram, hs, p.match_threshold);
          if (!ci) {
            candidates.push_back({obj.histogram, obj.area, 0, 0, false});
            ci = candidates.size() - 1;
          }
          const Candidate& c = candidates[*ci];
          if (c.noise || c.session_tries >= p.attempts_per_object) continue;
          if (c.session_tries < best_tries) {
            best_tries = c.session_tries;
            pick = &obj;
            cand_idx = ci;
          }
        }
        if (pick) {
          const Candidate& c = candidates[*cand_idx];
          auto is_bound = [&](int b) {
            const Point bp = rec.probe_blocks[static_cast<size_t>(b)];
            return std::any_of(rec.bindings.begin(), rec.bindings.end(),
                               [&](const Binding& x) { return x.centroid == bp; });
          };
          for (int pass = 0; pass < 2 && block < 0; ++pass)
            for (int b : detail::kBlockOrder)
              if (!(c.tried & (1u << b)) && (pass == 1 || !is_bound(b))) {
                block = b;
                break;
              }
          drop_at = rec.probe_blocks[static_cast<size_t>(block)];
        }
      }
      if (!pick) {
        stuck = true;
        break;
      }

      const auto out = actor.drag(*scene, *pick, drop_at);
      if (!out.clicked) {
        if (out.status != SessionStatus::InProgress) break;
        src.wait(p.settle);
        continue;
      }
      ++report.drags;
      if (binding_idx) {
        if (out.matched) {
          satisfied.insert({drop_at.x, drop_at.y});
          ++matched;
        } else {
          ++binding_failures[*binding_idx];
        }
      } else {
        Candidate& c = candidates[*cand_idx];
        c.tried = static_cast<uint16_t>(c.tried | (1u << block));
        ++c.session_tries;
        if (out.matched) {
          rec.bindings.push_back({c.histogram, c.area, drop_at});
          satisfied.insert({drop_at.x, drop_at.y});
          ++matched;
          c.noise = true;  // now a binding; never probe it again
        } else if (c.tried == 0x1ff) {
          c.noise = true;
          rec.noise.push_back({c.histogram, c.area});
        }
      }
      if (out.status == SessionStatus::Complete) {
        report.completed = true;
        break;
      }
      if (out.status != SessionStatus::InProgress) break;
    }
    if (report.completed) break;
    const bool anything_left = std::any_of(candidates.begin(), candidates.end(),
                                           [](const Candidate& c) { return !c.noise; });
    if (stuck && !anything_left && rec.bindings.empty()) return unexpected(SolverError::ProbeExhausted);
  }
  report.sim_time = src.now() - t0;
  if (report.record.bindings.empty()) return unexpected(SolverError::ProbeExhausted);
  return report;
}

// --- Attacking ---------------------------------------------------------------

enum class AttackOutcome : uint8_t { Success, LockedOut, TimedOut, UnknownChallenge, MatchFailed };

constexpr std::string_view to_string(AttackOutcome o) {
  switch (o) {
    case AttackOutcome::Success: return "success";
    case AttackOutcome::LockedOut: return "locked-out";
    case AttackOutcome::TimedOut: return "timed-out";
    case AttackOutcome::UnknownChallenge: return "unknown-challenge";
    case AttackOutcome::MatchFailed: return "match-failed";
  }
  return "?";
}

struct AttackResult {
  AttackOutcome outcome = AttackOutcome::MatchFailed;
  int drags_total = 0;
  int drags_correct = 0;
  uint32_t frames_elapsed = 0;
  bool learned_new = false;
  double sim_time = 0;    // from session start to the end of the attack
  double learn_time = 0;  // background learning share
};

struct LearnOutcome {
  KnowledgeRecord record;
  int drags = 0;
  int learned = 0;
  std::vector<Point> satisfied;  // centroids matched while learning
  SessionStatus status = SessionStatus::InProgress;
};

/// Drags objects the record does not recognise to the record's known target
/// centroids only. On success the updated record replaces the old one in `db`.
inline Expected<LearnOutcome, SolverError> continuous_learn(ChallengeSource& src, Dictionary& db,
                                                            const KnowledgeRecord& rec,
                                                            const std::vector<Point>& already_satisfied,
                                                            int expected_moving, const SolverParams& p = {},
                                                            Rng* rng_in = nullptr) {
  Rng local(derive_seed(p.seed, 0xc1));
  Rng& rng = rng_in ? *rng_in : local;
  LearnOutcome out;
  out.record = rec;
  KnowledgeRecord& work = out.record;
  detail::Actor actor(src, work, p, rng);
  std::vector<Point> open;
  for (const Point& c : rec.target_centroids())
    if (std::find(already_satisfied.begin(), already_satisfied.end(), c) == already_satisfied.end())
      open.push_back(c);

  struct Unknown {
    Histogram histogram;
    int area;
    std::vector<Point> tried;
    int tries = 0;
    bool done = false;
  };
  std::vector<Unknown> unknowns;
  bool any_unknown_seen = false;
  // Touching objects show up as one large blob; never try to learn those.
  int largest_known = 0;
  for (const auto& b : rec.bindings) largest_known = std::max(largest_known, b.area);
  for (const auto& n : rec.noise) largest_known = std::max(largest_known, n.area);
  const int merge_area = largest_known * 8 / 5;
  for (int guard = 0; guard < 100 && !open.empty(); ++guard) {
    auto scene = actor.stable_scene(expected_moving);
    if (!scene) return unexpected(SolverError::Transport);
    out.status = scene->status;
    if (scene->status != SessionStatus::InProgress) break;
    // Breadth-first: the unknown with the fewest tries goes next.
    const ForegroundObject* pick = nullptr;
    std::optional<size_t> ui;
    Point target;
    for (const auto& obj : scene->moving) {
      bool known = detail::is_known_noise(work, obj.histogram, p.match_threshold);
      for (const auto& b : work.bindings) known |= histogram_distance(obj.histogram, b.histogram) <= p.match_threshold;
      if (known || (largest_known > 0 && obj.area > merge_area)) continue;
      any_unknown_seen = true;
      std::optional<size_t> si;
      for (size_t k = 0; k < unknowns.size(); ++k)
        if (histogram_distance(obj.histogram, unknowns[k].histogram) <= p.match_threshold) si = k;
      if (!si) {
        unknowns.push_back({obj.histogram, obj.area, {}});
        si = unknowns.size() - 1;
      }
      const Unknown* slot = &unknowns[*si];
      if (slot->done || slot->tries >= p.attempts_per_object || (ui && unknowns[*ui].tries <= slot->tries)) continue;
      const auto untried = std::find_if(open.begin(), open.end(), [&](const Point& c) {
        return std::find(slot->tried.begin(), slot->tried.end(), c) == slot->tried.end();
      });
      if (untried == open.end()) continue;
      pick = &obj;
      ui = si;
      target = *untried;
    }
    if (!pick) break;
    Unknown* u = &unknowns[*ui];
    const auto res = actor.drag(*scene, *pick, target);
    if (!res.clicked) {
      src.wait(p.settle);
      continue;
    }
    ++out.drags;
    ++u->tries;
    u->tried.push_back(target);
    if (res.matched) {
      work.bindings.push_back({u->histogram, u->area, target});
      out.satisfied.push_back(target);
      open.erase(std::find(open.begin(), open.end(), target));
      u->done = true;
      ++out.learned;
      --expected_moving;
    } else if (std::all_of(open.begin(), open.end(), [&](const Point& c) {
                 return std::find(u->tried.begin(), u->tried.end(), c) != u->tried.end();
               })) {
      u->done = true;
      work.noise.push_back({u->histogram, u->area});
    }
    out.status = res.status;
    if (res.status != SessionStatus::InProgress) break;
  }
  if (!any_unknown_seen) {
    out.record = rec;  // nothing new on screen: leave the record as it was
    return out;
  }
  if (out.learned == 0) return unexpected(SolverError::ProbeExhausted);
  db.upsert(work);
  return out;
}

/// Plays one fresh challenge with the dictionary: learn, identify, then drag
/// each known answer object straight to its target centroid.
inline AttackResult attack(ChallengeSource& src, Dictionary& db, GameType game, int fps, int objects,
                           const SolverParams& p = {}) {
  AttackResult result;
  Rng rng(derive_seed(p.seed, 0xa77ac));
  const double t0 = src.now();
  auto finish = [&](AttackOutcome o) {
    result.outcome = o;
    result.sim_time = src.now() - t0;
    return result;
  };
  if (!src.start(game, fps, objects)) return finish(AttackOutcome::UnknownChallenge);
  auto learned = learn_scene(src, p);
  if (!learned) return finish(AttackOutcome::MatchFailed);
  result.learn_time = src.now() - t0;
  auto found = db.identify(learned->background, p.identify_threshold);
  if (!found) return finish(AttackOutcome::UnknownChallenge);
  KnowledgeRecord rec = std::move(*found);

  detail::Actor actor(src, rec, p, rng);
  std::vector<Point> satisfied;
  SessionStatus status = SessionStatus::InProgress;
  int misses = 0;
  for (int guard = 0; guard < 200; ++guard) {
    const int expected = learned->expected_objects - static_cast<int>(satisfied.size());
    auto scene = actor.stable_scene(expected);
    if (!scene) break;
    status = scene->status;
    result.frames_elapsed = scene->frame_index;
    if (status != SessionStatus::InProgress) break;

    const ForegroundObject* pick = nullptr;
    Point target;
    for (const Point& c : rec.target_centroids()) {
      if (std::find(satisfied.begin(), satisfied.end(), c) != satisfied.end()) continue;
      double best = p.match_threshold;
      for (const auto& obj : scene->moving)
        for (const auto& b : rec.bindings) {
          if (b.centroid != c) continue;
          const double d = histogram_distance(obj.histogram, b.histogram);
          if (d <= best) {
            best = d;
            pick = &obj;
          }
        }
      if (pick) {
        target = c;
        break;
      }
    }
    if (!pick) {
      if (++misses <= p.observe_retries) {
        src.wait(p.settle);
        continue;
      }
      if (!p.continuous_learning) break;
      auto cl = continuous_learn(src, db, rec, satisfied, expected, p, &rng);
      if (!cl || cl->learned == 0) break;
      result.learned_new = true;
      result.drags_total += cl->drags;
      result.drags_correct += cl->learned;
      rec = cl->record;
      for (const Point& s : cl->satisfied) satisfied.push_back(s);
      status = cl->status;
      misses = 0;
      if (status != SessionStatus::InProgress) break;
      continue;
    }
    misses = 0;
    const auto out = actor.drag(*scene, *pick, target);
    if (!out.clicked) {
      if (out.status != SessionStatus::InProgress) {
        status = out.status;
        break;
      }
      src.wait(p.settle);
      continue;
    }
    ++result.drags_total;
    if (out.matched) {
      ++result.drags_correct;
      satisfied.push_back(target);
    }
    status = out.status;
    result.frames_elapsed = actor.last_frame_index;
    if (status != SessionStatus::InProgress) break;
  }
  switch (status) {
    case SessionStatus::Complete: return finish(AttackOutcome::Success);
    case SessionStatus::LockedOut: return finish(AttackOutcome::LockedOut);
    case SessionStatus::TimedOut: return finish(AttackOutcome::TimedOut);
    default: return finish(AttackOutcome::MatchFailed);
  }
}

// --- Random guessing against a live challenge ----------------------------------

/// Drops r random moving-area grid cells onto r random target grid cells per
/// trial. Needs a service with drag caps disabled.
inline RateEstimate random_guess_attack(ChallengeSource& src, GameType game, int fps, int objects,
                                        const GuessModel& model, uint64_t trials, uint64_t seed) {
  if (trials > kMaxGuessTrials) throw std::invalid_argument("too many guess trials");
  const LayoutSpec geo = layout_geometry(game, objects, 360, 130);
  const Rect m = geo.moving_area, t = geo.target_region;
  const int side = static_cast<int>(std::lround(std::sqrt(model.object_cells)));
  Rng rng(seed);
  uint64_t wins = 0;
  for (uint64_t i = 0; i < trials; ++i) {
    if (!src.start(game, fps, objects)) break;
    src.observe();
    std::vector<int> cells, dests;
    auto distinct = [&](std::vector<int>& used, int n) {
      for (;;) {
        const int v = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
        if (std::find(used.begin(), used.end(), v) == used.end()) {
          used.push_back(v);
          return v;
        }
      }
    };
    SessionStatus status = SessionStatus::InProgress;
    for (int k = 0; k < model.r; ++k) {
      const int cell = distinct(cells, model.object_cells);
      const int dest = distinct(dests, model.target_cells);
      const Point from{m.left + (2 * (cell % side) + 1) * m.width() / (2 * side),
                       m.top + (2 * (cell / side) + 1) * m.height() / (2 * side)};
      const Point to{t.left + (2 * (dest % 3) + 1) * t.width() / 6, t.top + (2 * (dest / 3) + 1) * t.height() / 6};
      if (!src.click(from)) continue;
      auto r = src.drop(to);
      if (r) status = r->status;
    }
    wins += status == SessionStatus::Complete;
  }
  return make_rate_estimate(wins, trials);
}

}  // namespace dcg
