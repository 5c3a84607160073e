#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <stdexcept>
#include <vector>

#include "dcg/bytes.hpp"
#include "dcg/geometry.hpp"

namespace dcg {

inline constexpr int kCodeCount = 64;

struct Rgb {
  uint8_t r = 0;
  uint8_t g = 0;
  uint8_t b = 0;

  friend constexpr bool operator==(Rgb, Rgb) = default;
};

/// 6-bit colour code: top two bits of R, G and B, packed as RRGGBB.
constexpr uint8_t quantize(Rgb c) {
  return static_cast<uint8_t>(((c.r >> 6) << 4) | ((c.g >> 6) << 2) | (c.b >> 6));
}

/// Centre of the quantisation cell for a code; quantize(dequantize(c)) == c.
constexpr Rgb dequantize(uint8_t code) {
  auto level = [](int two_bits) { return static_cast<uint8_t>((two_bits << 6) | 0x20); };
  return {level((code >> 4) & 3), level((code >> 2) & 3), level(code & 3)};
}

/// Builds a colour from 2-bit channel levels, at the centre of its cell.
constexpr Rgb level_color(int r, int g, int b) {
  return dequantize(static_cast<uint8_t>((r << 4) | (g << 2) | b));
}

/// W x H grid of colour codes with an optional 24-bit sidecar.
///
/// When the RGB plane is present the code plane is always its quantisation;
/// set_pixel keeps both in step.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, uint8_t fill = 0)
      : width_(width), height_(height), codes_(checked_size(width, height), fill) {}

  static Frame from_rgb(int width, int height, std::span<const uint8_t> rgb) {
    Frame f(width, height);
    if (rgb.size() != f.codes_.size() * 3) throw std::invalid_argument("rgb plane size mismatch");
    f.rgb_.assign(rgb.begin(), rgb.end());
    for (size_t i = 0; i < f.codes_.size(); ++i)
      f.codes_[i] = quantize({rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]});
    return f;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  size_t pixel_count() const { return codes_.size(); }
  Rect bounds() const { return {0, 0, width_, height_}; }
  bool in_bounds(Point p) const { return bounds().contains(p); }

  uint8_t code(int x, int y) const { return codes_[index(x, y)]; }
  uint8_t code(Point p) const { return code(p.x, p.y); }
  void set_code(int x, int y, uint8_t c) {
    codes_[index(x, y)] = static_cast<uint8_t>(c & 63);
    if (!rgb_.empty()) write_rgb(index(x, y), dequantize(c));
  }

  bool has_rgb() const { return !rgb_.empty(); }
  void enable_rgb() {
    if (!rgb_.empty()) return;
    rgb_.resize(codes_.size() * 3);
    for (size_t i = 0; i < codes_.size(); ++i) write_rgb(i, dequantize(codes_[i]));
  }
  void drop_rgb() { rgb_.clear(); }

  Rgb rgb(int x, int y) const {
    if (rgb_.empty()) return dequantize(code(x, y));
    const size_t i = index(x, y) * 3;
    return {rgb_[i], rgb_[i + 1], rgb_[i + 2]};
  }

  void set_pixel(int x, int y, Rgb c) {
    const size_t i = index(x, y);
    codes_[i] = quantize(c);
    if (!rgb_.empty()) write_rgb(i, c);
  }

  void fill_rect(const Rect& r, Rgb c) {
    const Rect clipped = r.intersected(bounds());
    for (int y = clipped.top; y < clipped.bottom; ++y)
      for (int x = clipped.left; x < clipped.right; ++x) set_pixel(x, y, c);
  }

  std::span<const uint8_t> codes() const { return codes_; }
  std::span<uint8_t> codes() { return codes_; }
  std::span<const uint8_t> rgb_plane() const { return rgb_; }

  friend bool operator==(const Frame& a, const Frame& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.codes_ == b.codes_;
  }

 private:
  static size_t checked_size(int w, int h) {
    if (w <= 0 || h <= 0 || w > 0xffff || h > 0xffff)
      throw std::invalid_argument("frame dimensions out of range");
    return static_cast<size_t>(w) * static_cast<size_t>(h);
  }
  size_t index(int x, int y) const {
    return static_cast<size_t>(y) * static_cast<size_t>(width_) + static_cast<size_t>(x);
  }
  void write_rgb(size_t i, Rgb c) {
    rgb_[3 * i] = c.r;
    rgb_[3 * i + 1] = c.g;
    rgb_[3 * i + 2] = c.b;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<uint8_t> codes_;
  std::vector<uint8_t> rgb_;
};

// --- DCGF container -------------------------------------------------------
//
//   offset 0   "DCGF"            4 bytes
//   offset 4   width             u16 little-endian
//   offset 6   height            u16 little-endian
//   offset 8   codes             width*height bytes, row-major, each in [0,63]
//
// The optional RGB sidecar is a separate file of width*height*3 bytes
// (R,G,B per pixel, row-major).

inline constexpr std::string_view kFrameMagic = "DCGF";

inline void append_dcgf(ByteWriter& w, const Frame& f) {
  w.raw(kFrameMagic);
  w.u16(static_cast<uint16_t>(f.width()));
  w.u16(static_cast<uint16_t>(f.height()));
  w.raw(f.codes());
}

inline std::vector<uint8_t> encode_dcgf(const Frame& f) {
  ByteWriter w;
  append_dcgf(w, f);
  return w.take();
}

inline Frame read_dcgf(ByteReader& r) {
  r.expect_magic(kFrameMagic);
  const int w = r.u16();
  const int h = r.u16();
  if (w == 0 || h == 0) throw FormatError("DCGF with zero dimension");
  Frame f(w, h);
  auto codes = r.raw(f.pixel_count());
  for (size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] >= kCodeCount) throw FormatError("DCGF code out of range");
    f.codes()[i] = codes[i];
  }
  return f;
}

inline Frame decode_dcgf(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  Frame f = read_dcgf(r);
  if (r.remaining() != 0) throw FormatError("trailing bytes after DCGF payload");
  return f;
}

inline std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::filesystem::path rgb_sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p += ".rgb";
  return p;
}

/// Writes the DCGF file and, when the frame carries RGB, the sidecar next to it.
inline void save_frame(const std::filesystem::path& path, const Frame& f) {
  write_file_bytes(path, encode_dcgf(f));
  if (f.has_rgb()) write_file_bytes(rgb_sidecar_path(path), f.rgb_plane());
}

inline Frame load_frame(const std::filesystem::path& path) {
  Frame f = decode_dcgf(read_file_bytes(path));
  const auto side = rgb_sidecar_path(path);
  if (std::filesystem::exists(side)) {
    auto rgb = read_file_bytes(side);
    Frame with_rgb = Frame::from_rgb(f.width(), f.height(), rgb);
    if (!(with_rgb == f)) throw FormatError("RGB sidecar disagrees with code plane");
    return with_rgb;
  }
  return f;
}

/// 24-bit bottom-up BMP, used to hand frames to browsers.
inline std::vector<uint8_t> encode_bmp(const Frame& f) {
  const int row = (f.width() * 3 + 3) & ~3;
  const uint32_t image_size = static_cast<uint32_t>(row * f.height());
  ByteWriter w;
  w.raw(std::string_view("BM"));
  w.u32(54 + image_size);
  w.u32(0);
  w.u32(54);
  w.u32(40);
  w.u32(static_cast<uint32_t>(f.width()));
  w.u32(static_cast<uint32_t>(f.height()));
  w.u16(1);
  w.u16(24);
  w.u32(0);
  w.u32(image_size);
  w.u32(2835);
  w.u32(2835);
  w.u32(0);
  w.u32(0);
  for (int y = f.height() - 1; y >= 0; --y) {
    for (int x = 0; x < f.width(); ++x) {
      const Rgb c = f.rgb(x, y);
      w.u8(c.b);
      w.u8(c.g);
      w.u8(c.r);
    }
    for (int pad = f.width() * 3; pad < row; ++pad) w.u8(0);
  }
  return w.take();
}

}  // namespace dcg
