#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dcg/frame.hpp"
#include "dcg/geometry.hpp"
#include "dcg/rng.hpp"

namespace dcg {

using Histogram = std::array<uint32_t, kCodeCount>;

enum class GameType : uint8_t { Ships = 0, Shapes = 1, Animals = 2, Parking = 3 };

inline constexpr std::array<GameType, 4> kAllGames = {GameType::Ships, GameType::Shapes,
                                                      GameType::Animals, GameType::Parking};

constexpr std::string_view to_string(GameType g) {
  switch (g) {
    case GameType::Ships: return "ships";
    case GameType::Shapes: return "shapes";
    case GameType::Animals: return "animals";
    case GameType::Parking: return "parking";
  }
  return "?";
}

inline std::optional<GameType> parse_game_type(std::string_view s) {
  for (GameType g : kAllGames)
    if (to_string(g) == s) return g;
  return std::nullopt;
}

enum class SpriteRole : uint8_t { Answer, Noise, TargetMarker };
enum class ShapeKind : uint8_t { Polygon, Hull, Blob, Ring };

/// One kind of drawable object in a game (a ship, a bone, a target circle...).
struct SpriteClass {
  int class_id = 0;
  GameType game = GameType::Ships;
  SpriteRole role = SpriteRole::Noise;
  std::string_view name;
  Rgb base_color;
  Rgb accent_color;
  ShapeKind shape = ShapeKind::Blob;
  int sides = 0;  // polygon/ring vertices, 0 = ellipse
  double rotation_deg = -90.0;
  int nominal_size = 18;  // width in pixels
  double aspect = 1.0;    // height / width
};

/// Rasterised sprite: tight bounding box, opaque where mask != 0.
struct Sprite {
  int class_id = 0;
  int variant = 0;
  int width = 0;
  int height = 0;
  std::vector<uint8_t> mask;
  std::vector<Rgb> pixels;

  bool opaque(int x, int y) const { return mask[static_cast<size_t>(y * width + x)] != 0; }
  Rgb color(int x, int y) const { return pixels[static_cast<size_t>(y * width + x)]; }
  int area() const { return static_cast<int>(std::count(mask.begin(), mask.end(), uint8_t{1})); }

  Histogram histogram() const {
    Histogram h{};
    for (size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) ++h[quantize(pixels[i])];
    return h;
  }

  /// Opaque pixel closest to the bounding-box centre (where a person would click).
  Point grab_point() const {
    const double cx = (width - 1) / 2.0;
    const double cy = (height - 1) / 2.0;
    Point best{0, 0};
    double best_d = 1e18;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        if (!opaque(x, y)) continue;
        const double d = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        if (d < best_d) {
          best_d = d;
          best = {x, y};
        }
      }
    return best;
  }
};

/// Static scenery and sprite catalogue of one game type.
struct GameArt {
  GameType game;
  std::string_view instruction;
  Rgb moving_background;
  Rgb target_background;
  Rgb divider;
  Rgb text;
  std::optional<Rgb> dock_outline;
  bool target_on_right = true;
  bool empty_target = false;
  int answer_multiplicity = 1;
  std::vector<SpriteClass> classes;

  std::vector<const SpriteClass*> with_role(SpriteRole role) const {
    std::vector<const SpriteClass*> out;
    for (const auto& c : classes)
      if (c.role == role) out.push_back(&c);
    return out;
  }
  const SpriteClass& find(int class_id) const {
    for (const auto& c : classes)
      if (c.class_id == class_id) return c;
    throw std::out_of_range("unknown sprite class id");
  }
  std::vector<uint8_t> background_codes() const {
    std::vector<uint8_t> out{quantize(moving_background), quantize(target_background),
                             quantize(divider), quantize(text)};
    if (dock_outline) out.push_back(quantize(*dock_outline));
    return out;
  }
};

namespace detail {

inline SpriteClass make_class(int id, GameType g, SpriteRole role, std::string_view name, Rgb body,
                              Rgb accent, ShapeKind shape, int sides, int size, double aspect,
                              double rotation = -90.0) {
  SpriteClass c;
  c.class_id = id;
  c.game = g;
  c.role = role;
  c.name = name;
  c.base_color = body;
  c.accent_color = accent;
  c.shape = shape;
  c.sides = sides;
  c.rotation_deg = rotation;
  c.nominal_size = size;
  c.aspect = aspect;
  return c;
}

inline GameArt build_art(GameType g) {
  using enum SpriteRole;
  using enum ShapeKind;
  auto L = level_color;
  GameArt a;
  a.game = g;
  switch (g) {
    case GameType::Ships:
      a.instruction = "PLACE THE SHIP IN THE SEA";
      a.moving_background = L(3, 3, 2);
      a.target_background = L(0, 1, 3);
      a.divider = L(2, 2, 1);
      a.text = L(1, 1, 1);
      a.target_on_right = true;
      a.answer_multiplicity = 1;
      a.classes = {
          make_class(0, g, Answer, "ship", L(3, 0, 0), L(3, 3, 3), Hull, 0, 20, 0.8),
          make_class(20, g, Noise, "bird", L(0, 0, 1), L(3, 3, 0), Blob, 0, 17, 0.9),
          make_class(21, g, Noise, "monkey", L(2, 1, 0), L(3, 2, 1), Blob, 0, 18, 1.0),
          make_class(22, g, Noise, "squirrel", L(1, 0, 0), L(3, 2, 2), Blob, 0, 16, 1.1),
          make_class(23, g, Noise, "plane", L(2, 2, 3), L(0, 0, 2), Polygon, 3, 19, 1.0),
          make_class(24, g, Noise, "turtle", L(0, 2, 0), L(0, 1, 0), Blob, 0, 19, 0.8),
      };
      break;
    case GameType::Shapes:
      a.instruction = "MATCH THE SHAPES";
      a.moving_background = L(3, 3, 3);
      a.target_background = L(0, 1, 2);
      a.divider = L(2, 2, 2);
      a.text = L(1, 1, 2);
      a.target_on_right = false;
      a.answer_multiplicity = 2;
      a.classes = {
          make_class(0, g, Answer, "circle", L(3, 0, 0), L(1, 0, 0), Polygon, 0, 18, 1.0),
          make_class(1, g, Answer, "pentagon", L(0, 2, 0), L(0, 1, 0), Polygon, 5, 19, 1.0),
          make_class(10, g, TargetMarker, "circle-target", L(3, 3, 0), L(3, 3, 0), Ring, 0, 30, 1.0),
          make_class(11, g, TargetMarker, "pentagon-target", L(3, 2, 0), L(3, 2, 0), Ring, 5, 30, 1.0),
          make_class(20, g, Noise, "triangle", L(0, 0, 3), L(0, 0, 1), Polygon, 3, 19, 1.0),
          make_class(21, g, Noise, "square", L(3, 0, 3), L(1, 0, 1), Polygon, 4, 22, 1.0, -45.0),
          make_class(22, g, Noise, "hexagon", L(2, 1, 0), L(1, 0, 0), Polygon, 6, 18, 1.0),
          make_class(23, g, Noise, "octagon", L(0, 3, 3), L(0, 1, 1), Polygon, 8, 18, 1.0),
          make_class(24, g, Noise, "diamond", L(1, 0, 2), L(3, 2, 3), Polygon, 4, 17, 1.2),
      };
      break;
    case GameType::Animals:
      a.instruction = "FEED THE ANIMALS";
      a.moving_background = L(2, 3, 2);
      a.target_background = L(3, 3, 2);
      a.divider = L(1, 2, 1);
      a.text = L(0, 1, 0);
      a.target_on_right = true;
      a.answer_multiplicity = 3;
      a.classes = {
          make_class(0, g, Answer, "bone", L(3, 3, 3), L(2, 2, 3), Blob, 0, 20, 0.7),
          make_class(1, g, Answer, "banana", L(3, 3, 0), L(2, 2, 0), Blob, 0, 19, 0.8),
          make_class(2, g, Answer, "carrot", L(3, 1, 0), L(0, 2, 0), Polygon, 3, 20, 1.0, 90.0),
          make_class(10, g, TargetMarker, "dog", L(2, 1, 1), L(1, 0, 0), Blob, 0, 28, 0.8),
          make_class(11, g, TargetMarker, "monkey", L(1, 1, 0), L(3, 2, 1), Blob, 0, 28, 0.8),
          make_class(12, g, TargetMarker, "rabbit", L(2, 2, 2), L(3, 3, 3), Blob, 0, 28, 0.8),
          make_class(20, g, Noise, "flower", L(3, 0, 3), L(3, 3, 0), Polygon, 5, 18, 1.0),
          make_class(21, g, Noise, "ball", L(0, 0, 3), L(3, 3, 3), Polygon, 0, 17, 1.0),
          make_class(22, g, Noise, "fish", L(0, 2, 3), L(3, 2, 0), Blob, 0, 20, 0.7),
          make_class(23, g, Noise, "shoe", L(1, 1, 1), L(3, 0, 0), Hull, 0, 19, 0.8),
          make_class(24, g, Noise, "leaf", L(0, 2, 0), L(1, 3, 0), Blob, 0, 18, 0.9),
      };
      break;
    case GameType::Parking:
      a.instruction = "PARK THE BOAT";
      a.moving_background = L(0, 2, 3);
      a.target_background = L(0, 2, 3);
      a.divider = L(0, 2, 3);
      a.text = L(3, 3, 3);
      a.dock_outline = L(3, 3, 1);
      a.target_on_right = false;
      a.empty_target = true;
      a.answer_multiplicity = 1;
      a.classes = {
          make_class(0, g, Answer, "yellow-boat", L(3, 3, 0), L(3, 0, 0), Hull, 0, 16, 0.75),
          make_class(20, g, Noise, "red-boat", L(3, 0, 0), L(0, 0, 0), Hull, 0, 16, 0.75),
          make_class(21, g, Noise, "green-boat", L(0, 3, 0), L(1, 1, 1), Hull, 0, 16, 0.75),
          make_class(22, g, Noise, "purple-boat", L(2, 0, 2), L(3, 2, 3), Hull, 0, 16, 0.75),
          make_class(23, g, Noise, "orange-boat", L(3, 1, 0), L(0, 0, 1), Hull, 0, 16, 0.75),
          make_class(24, g, Noise, "gray-boat", L(2, 2, 2), L(1, 0, 0), Hull, 0, 16, 0.75),
      };
      break;
  }
  return a;
}

// 3x5 glyphs, one row per entry, bit 2 = leftmost column.
inline std::array<uint8_t, 5> glyph(char c) {
  switch (c) {
    case 'A': return {2, 5, 7, 5, 5};
    case 'B': return {6, 5, 6, 5, 6};
    case 'C': return {3, 4, 4, 4, 3};
    case 'D': return {6, 5, 5, 5, 6};
    case 'E': return {7, 4, 6, 4, 7};
    case 'F': return {7, 4, 6, 4, 4};
    case 'H': return {5, 5, 7, 5, 5};
    case 'I': return {7, 2, 2, 2, 7};
    case 'K': return {5, 5, 6, 5, 5};
    case 'L': return {4, 4, 4, 4, 7};
    case 'M': return {5, 7, 7, 5, 5};
    case 'N': return {6, 5, 5, 5, 5};
    case 'O': return {2, 5, 5, 5, 2};
    case 'P': return {6, 5, 6, 4, 4};
    case 'R': return {6, 5, 6, 5, 5};
    case 'S': return {3, 4, 2, 1, 6};
    case 'T': return {7, 2, 2, 2, 2};
    case 'X': return {5, 5, 2, 5, 5};
    default: return {0, 0, 0, 0, 0};
  }
}

inline bool inside_convex(std::span<const PointF> poly, double x, double y) {
  bool has_pos = false, has_neg = false;
  for (size_t i = 0; i < poly.size(); ++i) {
    const PointF a = poly[i];
    const PointF b = poly[(i + 1) % poly.size()];
    const double cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
    if (cross > 0) has_pos = true;
    if (cross < 0) has_neg = true;
    if (has_pos && has_neg) return false;
  }
  return true;
}

inline std::vector<PointF> regular_polygon(double cx, double cy, double rx, double ry, int sides,
                                           double rotation_deg) {
  std::vector<PointF> pts;
  const double rot = rotation_deg * std::numbers::pi / 180.0;
  for (int i = 0; i < sides; ++i) {
    const double t = rot + 2.0 * std::numbers::pi * i / sides;
    pts.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return pts;
}

inline bool inside_ellipse(double cx, double cy, double rx, double ry, double x, double y) {
  const double dx = (x - cx) / rx;
  const double dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

/// Inside test for the regular shape (ellipse when sides == 0) scaled by `scale`.
inline bool inside_regular(int sides, double rotation, double w, double h, double scale, double x,
                           double y) {
  const double cx = w / 2.0, cy = h / 2.0;
  const double rx = w / 2.0 * scale, ry = h / 2.0 * scale;
  if (sides == 0) return inside_ellipse(cx, cy, rx, ry, x, y);
  auto poly = regular_polygon(cx, cy, rx, ry, sides, rotation);
  return inside_convex(poly, x, y);
}

/// Keeps the largest 4-connected opaque region and crops to its bounding box.
inline Sprite crop_to_largest_component(Sprite s) {
  const int w = s.width, h = s.height;
  std::vector<int> label(static_cast<size_t>(w * h), -1);
  int best_label = -1, best_size = 0, next = 0;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (!s.mask[static_cast<size_t>(start)] || label[static_cast<size_t>(start)] >= 0) continue;
    int size = 0;
    stack.push_back(start);
    label[static_cast<size_t>(start)] = next;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++size;
      const int px = p % w, py = p / w;
      const int nb[4][2] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
      for (auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const int qi = q[1] * w + q[0];
        if (s.mask[static_cast<size_t>(qi)] && label[static_cast<size_t>(qi)] < 0) {
          label[static_cast<size_t>(qi)] = next;
          stack.push_back(qi);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
    ++next;
  }
  if (best_label < 0) throw std::logic_error("sprite rasterised to nothing");
  Rect box{w, h, 0, 0};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (label[static_cast<size_t>(y * w + x)] == best_label) {
        box.left = std::min(box.left, x);
        box.top = std::min(box.top, y);
        box.right = std::max(box.right, x + 1);
        box.bottom = std::max(box.bottom, y + 1);
      }
  Sprite out;
  out.class_id = s.class_id;
  out.variant = s.variant;
  out.width = box.width();
  out.height = box.height();
  out.mask.assign(static_cast<size_t>(out.width * out.height), 0);
  out.pixels.assign(out.mask.size(), Rgb{});
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const size_t src = static_cast<size_t>((y + box.top) * w + (x + box.left));
      const size_t dst = static_cast<size_t>(y * out.width + x);
      if (label[src] == best_label) {
        out.mask[dst] = 1;
        out.pixels[dst] = s.pixels[src];
      }
    }
  return out;
}

inline uint8_t jitter_channel(uint8_t v, int offset) {
  // Stay inside the 64-wide quantisation cell of v.
  const int cell = v & 0xC0;
  return static_cast<uint8_t>(std::clamp(static_cast<int>(v) + offset, cell, cell + 63));
}

}  // namespace detail

inline const GameArt& game_art(GameType g) {
  static const std::array<GameArt, 4> arts = {detail::build_art(GameType::Ships),
                                              detail::build_art(GameType::Shapes),
                                              detail::build_art(GameType::Animals),
                                              detail::build_art(GameType::Parking)};
  return arts[static_cast<size_t>(g)];
}

/// Accent colour used by variant `k` (k >= 1) of a class. Never collides with the
/// game's scenery codes or with any class body colour of the same game.
inline Rgb variant_accent(const SpriteClass& cls, int k) {
  static constexpr std::array<std::array<int, 3>, 12> candidates = {{{0, 0, 0},
                                                                     {3, 3, 3},
                                                                     {1, 2, 3},
                                                                     {3, 1, 2},
                                                                     {2, 0, 3},
                                                                     {0, 3, 3},
                                                                     {3, 2, 0},
                                                                     {1, 0, 0},
                                                                     {0, 0, 2},
                                                                     {2, 3, 0},
                                                                     {1, 3, 3},
                                                                     {3, 1, 1}}};
  const GameArt& art = game_art(cls.game);
  auto banned = art.background_codes();
  for (const auto& c : art.classes) banned.push_back(quantize(c.base_color));
  banned.push_back(quantize(cls.accent_color));
  std::vector<Rgb> usable;
  for (const auto& c : candidates) {
    const Rgb rgb = level_color(c[0], c[1], c[2]);
    if (std::find(banned.begin(), banned.end(), quantize(rgb)) == banned.end()) usable.push_back(rgb);
  }
  return usable[static_cast<size_t>(k - 1) % usable.size()];
}

/// Rasterises variant `variant` of a class. Variant 0 is the canonical sprite;
/// later variants keep the dominant colour code but change accent colour, size
/// and proportions.
inline Sprite make_sprite(const SpriteClass& cls, int variant = 0) {
  int w = cls.nominal_size;
  double aspect = cls.aspect;
  Rgb body = cls.base_color;
  Rgb accent = cls.accent_color;
  double accent_scale = 0.55;
  if (variant > 0) {
    w += ((variant % 3) - 1) * 2;
    aspect *= 1.0 + 0.08 * (((variant + 1) % 3) - 1);
    const int off = ((variant * 9) % 49) - 24;
    body = {detail::jitter_channel(body.r, off), detail::jitter_channel(body.g, off),
            detail::jitter_channel(body.b, off)};
    accent = variant_accent(cls, variant);
    accent_scale = 0.6 + 0.03 * (variant % 3);
  }
  const int h = std::max(6, static_cast<int>(std::lround(w * aspect)));

  Sprite s;
  s.class_id = cls.class_id;
  s.variant = variant;
  s.width = w;
  s.height = h;
  s.mask.assign(static_cast<size_t>(w * h), 0);
  s.pixels.assign(s.mask.size(), Rgb{});
  const double W = w, H = h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      bool in_body = false, in_accent = false;
      switch (cls.shape) {
        case ShapeKind::Polygon:
          in_body = detail::inside_regular(cls.sides, cls.rotation_deg, W, H, 1.0, px, py);
          in_accent = detail::inside_regular(cls.sides, cls.rotation_deg, W, H, accent_scale, px, py);
          break;
        case ShapeKind::Ring: {
          const double inner = 1.0 - 5.0 / W;
          in_body = detail::inside_regular(cls.sides, cls.rotation_deg, W, H, 1.0, px, py) &&
                    !detail::inside_regular(cls.sides, cls.rotation_deg, W, H, inner, px, py);
          break;
        }
        case ShapeKind::Hull: {
          const std::array<PointF, 4> hull = {PointF{0.0, 0.42 * H}, PointF{W, 0.42 * H},
                                              PointF{0.8 * W, H}, PointF{0.2 * W, H}};
          const double cab_l = (0.5 - accent_scale * 0.4) * W, cab_r = (0.5 + accent_scale * 0.4) * W;
          in_accent = px >= cab_l && px < cab_r && py >= 0.05 * H && py < 0.5 * H;
          in_body = detail::inside_convex(hull, px, py) || in_accent;
          break;
        }
        case ShapeKind::Blob: {
          const bool torso = detail::inside_ellipse(W * 0.45, H * 0.58, W * 0.45, H * 0.40, px, py);
          const double hr = std::min(W, H) * 0.3 * (accent_scale / 0.55);
          in_accent = detail::inside_ellipse(W * 0.74, H * 0.34, hr, hr, px, py);
          in_body = torso || in_accent;
          break;
        }
      }
      if (!in_body) continue;
      const size_t i = static_cast<size_t>(y * w + x);
      s.mask[i] = 1;
      s.pixels[i] = in_accent ? accent : body;
    }
  return detail::crop_to_largest_component(std::move(s));
}

/// `n` variants of one class, variant 0 first.
inline std::vector<Sprite> sprite_pool(GameType game, int class_id, int n) {
  if (n < 1) throw std::invalid_argument("sprite_pool needs n >= 1");
  const SpriteClass& cls = game_art(game).find(class_id);
  std::vector<Sprite> out;
  out.reserve(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) out.push_back(make_sprite(cls, k));
  return out;
}

inline void stamp_sprite(Frame& f, const Sprite& s, Point top_left) {
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      if (!s.opaque(x, y)) continue;
      const int fx = top_left.x + x, fy = top_left.y + y;
      if (fx < 0 || fy < 0 || fx >= f.width() || fy >= f.height()) continue;
      f.set_pixel(fx, fy, s.color(x, y));
    }
}

/// Draws upper-case text with a 3x5 pixel font, 4 px advance per character.
inline void draw_text(Frame& f, Point origin, std::string_view text, Rgb color) {
  for (size_t i = 0; i < text.size(); ++i) {
    const auto g = detail::glyph(text[i]);
    for (int row = 0; row < 5; ++row)
      for (int col = 0; col < 3; ++col) {
        if (!((g[static_cast<size_t>(row)] >> (2 - col)) & 1)) continue;
        const int x = origin.x + static_cast<int>(i) * 4 + col, y = origin.y + row;
        if (f.in_bounds({x, y})) f.set_pixel(x, y, color);
      }
  }
}

struct SubTargetSlot {
  int id = 0;
  Rect bbox;
  Point centroid;
  int answer_class = 0;
  std::optional<int> marker_class;
};

/// Static geometry of a generated game.
struct LayoutSpec {
  GameType game = GameType::Ships;
  int width = 360;
  int height = 130;
  Rect target_region;
  Rect moving_area;
  std::vector<SubTargetSlot> sub_targets;
  bool empty_target = false;
  int answer_multiplicity = 1;
  std::vector<Point> slot_centers;
};

struct PlacedSprite {
  Sprite sprite;
  Point top_left;
  std::optional<int> sub_target;  // set for answer objects
};

struct GeneratedLayout {
  LayoutSpec spec;
  std::vector<PlacedSprite> objects;
  Frame background;
};

struct LayoutOptions {
  int width = 360;
  int height = 130;
  int answer_variant = 0;
  int noise_variant = 0;
};

/// Thrown when a layout cannot be realised (frame too small for the objects).
class LayoutError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline LayoutSpec layout_geometry(GameType game, int object_count, int width, int height) {
  const GameArt& art = game_art(game);
  LayoutSpec spec;
  spec.game = game;
  spec.width = width;
  spec.height = height;
  spec.empty_target = art.empty_target;
  spec.answer_multiplicity = art.answer_multiplicity;

  const int target_w = static_cast<int>(std::lround(width * 116.0 / 360.0));
  const int divider = std::max(2, static_cast<int>(std::lround(width * 6.0 / 360.0)));
  if (art.target_on_right) {
    spec.target_region = {width - target_w, 0, width, height};
    spec.moving_area = {0, 0, width - target_w - divider, height};
  } else {
    spec.target_region = {0, 0, target_w, height};
    spec.moving_area = {target_w + divider, 0, width, height};
  }
  const Rect t = spec.target_region;
  const auto answers = art.with_role(SpriteRole::Answer);
  const auto markers = art.with_role(SpriteRole::TargetMarker);
  auto centroid_of = [](const Rect& r) { return r.center_pixel(); };
  switch (game) {
    case GameType::Ships:
    case GameType::Parking: {
      const int inset = game == GameType::Ships ? 4 : 6;
      Rect box{t.left + inset, t.top + inset, t.right - inset, t.bottom - inset};
      spec.sub_targets.push_back({0, box, centroid_of(box), answers[0]->class_id, std::nullopt});
      break;
    }
    case GameType::Animals: {
      const int band = (height - 4) / 3;
      for (int i = 0; i < 3; ++i) {
        Rect box{t.left + 4, 2 + i * band, t.right - 4, 2 + (i + 1) * band - 2};
        spec.sub_targets.push_back(
            {i, box, centroid_of(box), answers[static_cast<size_t>(i)]->class_id, markers[static_cast<size_t>(i)]->class_id});
      }
      break;
    }
    case GameType::Shapes: {
      const int inner_w = t.width() - 8;
      const int half = (inner_w - 4) / 2;
      for (int i = 0; i < 2; ++i) {
        const int left = t.left + 4 + i * (half + 4);
        Rect box{left, t.top + 4, left + half, t.bottom - 4};
        spec.sub_targets.push_back(
            {i, box, centroid_of(box), answers[static_cast<size_t>(i)]->class_id, markers[static_cast<size_t>(i)]->class_id});
      }
      break;
    }
  }

  const Rect m = spec.moving_area;
  const int row_a = static_cast<int>(std::lround(height * 30.0 / 130.0));
  const int row_b = static_cast<int>(std::lround(height * 100.0 / 130.0));
  for (int i = 0; i < object_count; ++i) {
    const int cx = m.left + static_cast<int>(std::lround((i + 0.5) * m.width() / object_count));
    spec.slot_centers.push_back({cx, (i % 2 == 0) ? row_a : row_b});
  }
  return spec;
}

/// Renders the static scenery (backgrounds, target markers, instruction text).
inline Frame render_scenery(const LayoutSpec& spec) {
  const GameArt& art = game_art(spec.game);
  Frame f(spec.width, spec.height);
  f.enable_rgb();
  f.fill_rect(f.bounds(), art.divider);
  f.fill_rect(spec.moving_area, art.moving_background);
  f.fill_rect(spec.target_region, art.target_background);
  if (art.dock_outline) {
    const Rect r = spec.target_region;
    const Rect o{r.left + 2, r.top + 2, r.right - 2, r.bottom - 2};
    f.fill_rect({o.left, o.top, o.right, o.top + 2}, *art.dock_outline);
    f.fill_rect({o.left, o.bottom - 2, o.right, o.bottom}, *art.dock_outline);
    f.fill_rect({o.left, o.top, o.left + 2, o.bottom}, *art.dock_outline);
    f.fill_rect({o.right - 2, o.top, o.right, o.bottom}, *art.dock_outline);
  }
  for (const auto& st : spec.sub_targets) {
    if (!st.marker_class) continue;
    const Sprite marker = make_sprite(art.find(*st.marker_class));
    stamp_sprite(f, marker, {st.centroid.x - marker.width / 2, st.centroid.y - marker.height / 2});
  }
  draw_text(f, {spec.moving_area.left + 4, 3}, art.instruction, art.text);
  return f;
}

/// Builds one game instance: scenery, answer objects bound to sub-targets and
/// noise objects, each in one of the pre-specified slots.
inline GeneratedLayout generate_layout(GameType game, int object_count, uint64_t seed,
                                       const LayoutOptions& opts = {}) {
  const GameArt& art = game_art(game);
  const auto answers = art.with_role(SpriteRole::Answer);
  auto noise = art.with_role(SpriteRole::Noise);
  const int r = art.answer_multiplicity;
  if (object_count < r || object_count - r > static_cast<int>(noise.size()))
    throw LayoutError("object count incompatible with game type");

  GeneratedLayout out;
  out.spec = layout_geometry(game, object_count, opts.width, opts.height);
  Rng rng(derive_seed(seed, 0x1a40));
  rng.shuffle(noise.begin(), noise.end());

  for (int i = 0; i < r; ++i) {
    const auto& st = out.spec.sub_targets[static_cast<size_t>(game == GameType::Ships || game == GameType::Parking ? 0 : i)];
    out.objects.push_back({make_sprite(*answers[static_cast<size_t>(i)], opts.answer_variant), {}, st.id});
  }
  for (int i = 0; i < object_count - r; ++i)
    out.objects.push_back({make_sprite(*noise[static_cast<size_t>(i)], opts.noise_variant), {}, std::nullopt});
  rng.shuffle(out.objects.begin(), out.objects.end());

  const Rect m = out.spec.moving_area;
  for (size_t i = 0; i < out.objects.size(); ++i) {
    auto& o = out.objects[i];
    const Point c = out.spec.slot_centers[i];
    o.top_left = {c.x - o.sprite.width / 2, c.y - o.sprite.height / 2};
    const Rect box = Rect::from_size(o.top_left.x, o.top_left.y, o.sprite.width, o.sprite.height);
    if (!m.contains(box)) throw LayoutError("frame too small: object slot leaves the moving area");
    for (size_t j = 0; j < i; ++j) {
      const auto& p = out.objects[j];
      if (box.intersects(Rect::from_size(p.top_left.x, p.top_left.y, p.sprite.width, p.sprite.height)))
        throw LayoutError("frame too small: object slots overlap");
    }
  }
  out.background = render_scenery(out.spec);
  return out;
}

}  // namespace dcg
