#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "dcg/assets.hpp"
#include "dcg/expected.hpp"
#include "dcg/frame.hpp"
#include "dcg/geometry.hpp"

namespace dcg {

struct VisionParams {
  int learn_frames = 40;
  double sample_interval = 0.2;  // seconds
  int object_frames = 6;
  int min_component_size = 16;
  int edge_min_segment = 40;

  void validate() const {
    if (learn_frames < 1) throw std::invalid_argument("learn_frames must be positive");
    if (object_frames < 1 || object_frames > learn_frames)
      throw std::invalid_argument("object_frames must be in [1, learn_frames]");
    if (sample_interval <= 0) throw std::invalid_argument("sample_interval must be positive");
  }
};

inline constexpr double kMatchThreshold = 0.15;

struct Background {
  Frame codes;
  std::vector<float> confidence;  // modal count / frames
};

struct ForegroundObject {
  std::vector<Point> pixels;
  Rect bbox;
  Point centroid;
  int area = 0;
  Histogram histogram{};
};

enum class TargetMethod : uint8_t { MBR = 0, Edge = 1, Exclusion = 2 };

constexpr std::string_view to_string(TargetMethod m) {
  switch (m) {
    case TargetMethod::MBR: return "mbr";
    case TargetMethod::Edge: return "edge";
    case TargetMethod::Exclusion: return "exclusion";
  }
  return "?";
}

struct TargetEstimate {
  TargetMethod method = TargetMethod::MBR;
  Rect region;
  Point center;
};

enum class VisionError : uint8_t { NoComplement, NoEdges, NoForeground };

constexpr std::string_view to_string(VisionError e) {
  switch (e) {
    case VisionError::NoComplement: return "no complement";
    case VisionError::NoEdges: return "no edges";
    case VisionError::NoForeground: return "no foreground";
  }
  return "?";
}

/// Per-pixel mode over the frames; ties go to the lowest code.
inline Background learn_background(std::span<const Frame> frames) {
  if (frames.empty()) throw std::invalid_argument("learn_background needs frames");
  const int w = frames[0].width(), h = frames[0].height();
  for (const auto& f : frames)
    if (f.width() != w || f.height() != h) throw std::invalid_argument("frame dimension mismatch");
  Background bg{Frame(w, h), std::vector<float>(static_cast<size_t>(w) * h)};
  std::array<uint16_t, kCodeCount> counts{};
  const size_t n = static_cast<size_t>(w) * h;
  for (size_t i = 0; i < n; ++i) {
    counts.fill(0);
    for (const auto& f : frames) ++counts[f.codes()[i]];
    int best = 0;
    for (int c = 1; c < kCodeCount; ++c)
      if (counts[c] > counts[best]) best = c;
    bg.codes.codes()[i] = static_cast<uint8_t>(best);
    bg.confidence[i] = static_cast<float>(counts[best]) / static_cast<float>(frames.size());
  }
  return bg;
}

inline Background learn_background(std::span<const Frame> frames, const VisionParams& params) {
  params.validate();
  if (static_cast<int>(frames.size()) != params.learn_frames)
    throw std::invalid_argument("learn_background expects learn_frames frames");
  return learn_background(frames);
}

/// Binary mask (code 1) of pixels whose code differs from the background.
inline Frame foreground_mask(const Frame& frame, const Frame& background) {
  if (frame.width() != background.width() || frame.height() != background.height())
    throw std::invalid_argument("frame/background dimension mismatch");
  Frame mask(frame.width(), frame.height());
  auto out = mask.codes();
  const auto a = frame.codes();
  const auto b = background.codes();
  for (size_t i = 0; i < out.size(); ++i) out[i] = a[i] != b[i] ? 1 : 0;
  return mask;
}

namespace detail {

/// Labels connected regions of `on` pixels. Returns each region's pixel list.
template <class Pred>
std::vector<std::vector<Point>> connected_regions(int w, int h, Pred on, bool eight_connected) {
  std::vector<uint8_t> seen(static_cast<size_t>(w) * h, 0);
  std::vector<std::vector<Point>> regions;
  std::vector<Point> stack;
  static constexpr int dx8[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int dy8[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int nn = eight_connected ? 8 : 4;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (seen[i] || !on(x, y)) continue;
      std::vector<Point> region;
      seen[i] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        region.push_back(p);
        for (int k = 0; k < nn; ++k) {
          const int qx = p.x + dx8[k], qy = p.y + dy8[k];
          if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
          const size_t qi = static_cast<size_t>(qy) * w + qx;
          if (!seen[qi] && on(qx, qy)) {
            seen[qi] = 1;
            stack.push_back({qx, qy});
          }
        }
      }
      regions.push_back(std::move(region));
    }
  return regions;
}

inline Rect bounding_rect(std::span<const Point> pts) {
  Rect r{pts[0].x, pts[0].y, pts[0].x + 1, pts[0].y + 1};
  for (const Point& p : pts) r = r.united({p.x, p.y, p.x + 1, p.y + 1});
  return r;
}

inline PointF mean_point(std::span<const Point> pts) {
  double sx = 0, sy = 0;
  for (const Point& p : pts) {
    sx += p.x;
    sy += p.y;
  }
  return {sx / static_cast<double>(pts.size()), sy / static_cast<double>(pts.size())};
}

}  // namespace detail

/// 4-connected foreground components of at least `min_component_size` pixels.
inline std::vector<ForegroundObject> extract_foreground(const Frame& frame, const Frame& background,
                                                        const VisionParams& params = {}) {
  const Frame mask = foreground_mask(frame, background);
  auto regions = detail::connected_regions(
      mask.width(), mask.height(), [&](int x, int y) { return mask.code(x, y) != 0; }, false);
  std::vector<ForegroundObject> out;
  for (auto& px : regions) {
    if (static_cast<int>(px.size()) < params.min_component_size) continue;
    ForegroundObject o;
    o.area = static_cast<int>(px.size());
    o.bbox = detail::bounding_rect(px);
    o.centroid = detail::mean_point(px).rounded();
    for (const Point& p : px) ++o.histogram[frame.code(p)];
    o.pixels = std::move(px);
    out.push_back(std::move(o));
  }
  return out;
}

inline int total_area(std::span<const ForegroundObject> objs) {
  int a = 0;
  for (const auto& o : objs) a += o.area;
  return a;
}

/// Mask (code 1) covering the given components.
inline Frame component_mask(std::span<const ForegroundObject> objs, int width, int height) {
  Frame m(width, height);
  for (const auto& o : objs)
    for (const Point& p : o.pixels) m.set_code(p.x, p.y, 1);
  return m;
}

/// Indices of `m` equally spaced frames out of `n`: floor(k (n-1) / (m-1)).
inline std::vector<int> sample_indices(int n, int m) {
  if (m < 1 || m > n) throw std::invalid_argument("sample count out of range");
  std::vector<int> idx;
  if (m == 1) return {0};
  for (int k = 0; k < m; ++k) idx.push_back(static_cast<int>(static_cast<int64_t>(k) * (n - 1) / (m - 1)));
  return idx;
}

struct ObjectFrameSelection {
  size_t index = 0;
  std::vector<ForegroundObject> objects;
};

/// The frame with the most components (earliest on ties).
inline ObjectFrameSelection select_object_frame(std::span<const Frame> frames, const Frame& background,
                                                const VisionParams& params = {}) {
  if (frames.empty()) throw std::invalid_argument("select_object_frame needs frames");
  ObjectFrameSelection best;
  bool have = false;
  for (size_t i = 0; i < frames.size(); ++i) {
    auto objs = extract_foreground(frames[i], background, params);
    if (!have || objs.size() > best.objects.size()) {
      best.index = i;
      best.objects = std::move(objs);
      have = true;
    }
  }
  return best;
}

/// Largest cell of the 3x3 partition around the union of per-frame foreground MBRs.
inline Expected<TargetEstimate, VisionError> detect_target_mbr(const Frame& background,
                                                               std::span<const Frame> masks) {
  std::optional<Rect> mbr;
  for (const auto& m : masks) {
    if (m.width() != background.width() || m.height() != background.height())
      throw std::invalid_argument("mask dimension mismatch");
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x)
        if (m.code(x, y)) {
          const Rect px{x, y, x + 1, y + 1};
          mbr = mbr ? mbr->united(px) : px;
        }
  }
  if (!mbr) return unexpected(VisionError::NoForeground);
  const int W = background.width(), H = background.height();
  const std::array<int, 4> xs = {0, mbr->left, mbr->right, W};
  const std::array<int, 4> ys = {0, mbr->top, mbr->bottom, H};
  Rect best;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      if (r == 1 && c == 1) continue;
      const Rect cell{xs[c], ys[r], xs[c + 1], ys[r + 1]};
      if (cell.area() > best.area()) best = cell;
    }
  if (best.empty()) return unexpected(VisionError::NoComplement);
  return TargetEstimate{TargetMethod::MBR, best, best.center_pixel()};
}

/// Pixels where any 4-neighbour has a different code.
inline Frame edge_map(const Frame& f) {
  Frame e(f.width(), f.height());
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      const uint8_t c = f.code(x, y);
      const bool edge = (x > 0 && f.code(x - 1, y) != c) || (x + 1 < f.width() && f.code(x + 1, y) != c) ||
                        (y > 0 && f.code(x, y - 1) != c) || (y + 1 < f.height() && f.code(x, y + 1) != c);
      if (edge) e.set_code(x, y, 1);
    }
  return e;
}

/// Mean of the centroids of all sufficiently long edge segments.
inline Expected<TargetEstimate, VisionError> detect_target_edge(const Frame& background,
                                                                const VisionParams& params = {}) {
  const Frame edges = edge_map(background);
  auto segments = detail::connected_regions(
      edges.width(), edges.height(), [&](int x, int y) { return edges.code(x, y) != 0; }, true);
  double sx = 0, sy = 0;
  int kept = 0;
  std::optional<Rect> region;
  for (const auto& seg : segments) {
    if (static_cast<int>(seg.size()) < params.edge_min_segment) continue;
    const PointF c = detail::mean_point(seg);
    sx += c.x;
    sy += c.y;
    ++kept;
    const Rect box = detail::bounding_rect(seg);
    region = region ? region->united(box) : box;
  }
  if (kept == 0) return unexpected(VisionError::NoEdges);
  const Point center = PointF{sx / kept, sy / kept}.rounded();
  return TargetEstimate{TargetMethod::Edge, *region, center};
}

/// Largest region never covered by foreground in any sample.
inline Expected<TargetEstimate, VisionError> detect_target_exclusion(const Frame& background,
                                                                     std::span<const Frame> masks) {
  const int W = background.width(), H = background.height();
  std::vector<uint8_t> covered(static_cast<size_t>(W) * H, 0);
  for (const auto& m : masks) {
    if (m.width() != W || m.height() != H) throw std::invalid_argument("mask dimension mismatch");
    for (size_t i = 0; i < covered.size(); ++i) covered[i] |= m.codes()[i] != 0;
  }
  auto regions = detail::connected_regions(
      W, H, [&](int x, int y) { return !covered[static_cast<size_t>(y) * W + x]; }, false);
  if (regions.empty()) return unexpected(VisionError::NoComplement);
  const auto& largest = *std::max_element(regions.begin(), regions.end(),
                                          [](const auto& a, const auto& b) { return a.size() < b.size(); });
  return TargetEstimate{TargetMethod::Exclusion, detail::bounding_rect(largest),
                        detail::mean_point(largest).rounded()};
}

/// Shrinks `r` to the part free of lines that hold none of the region's dominant
/// colour: edge lines are peeled, and at an inner one (a divider) the larger
/// side is kept.
inline Rect trim_uniform_edges(const Frame& background, Rect r) {
  r = r.intersected(background.bounds());
  if (r.empty()) return r;
  std::array<int, kCodeCount> counts{};
  for (int y = r.top; y < r.bottom; ++y)
    for (int x = r.left; x < r.right; ++x) ++counts[background.code(x, y)];
  const auto dominant = static_cast<uint8_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  auto foreign = [&](int x0, int y0, int x1, int y1) {
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        if (background.code(x, y) == dominant) return false;
    return true;
  };
  bool changed = true;
  while (changed && r.width() > 2 && r.height() > 2) {
    changed = false;
    for (int x = r.left; x < r.right && !changed; ++x)
      if (foreign(x, r.top, x + 1, r.bottom)) {
        if (x - r.left >= r.right - x - 1) r.right = x;
        else r.left = x + 1;
        changed = true;
      }
    for (int y = r.top; y < r.bottom && !changed; ++y)
      if (foreign(r.left, y, r.right, y + 1)) {
        if (y - r.top >= r.bottom - y - 1) r.bottom = y;
        else r.top = y + 1;
        changed = true;
      }
  }
  return r;
}

/// Half the L1 distance between normalised histograms, in [0, 1].
inline double histogram_distance(const Histogram& a, const Histogram& b) {
  double sa = 0, sb = 0;
  for (int i = 0; i < kCodeCount; ++i) {
    sa += a[i];
    sb += b[i];
  }
  if (sa == 0 && sb == 0) return 0.0;
  if (sa == 0 || sb == 0) return 1.0;
  double d = 0;
  for (int i = 0; i < kCodeCount; ++i) d += std::abs(a[i] / sa - b[i] / sb);
  return std::min(1.0, d / 2);
}

inline bool histograms_match(const Histogram& a, const Histogram& b, double threshold = kMatchThreshold) {
  return histogram_distance(a, b) <= threshold;
}

/// Fraction of pixels where two code grids disagree.
inline double pixel_error_rate(const Frame& a, const Frame& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw std::invalid_argument("dimension mismatch");
  size_t bad = 0;
  for (size_t i = 0; i < a.pixel_count(); ++i) bad += a.codes()[i] != b.codes()[i];
  return static_cast<double>(bad) / static_cast<double>(a.pixel_count());
}

}  // namespace dcg
