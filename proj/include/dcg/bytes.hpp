#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dcg {

/// Thrown when a binary container cannot be decoded.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Little-endian byte sink shared by the frame, dictionary and wire formats.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) { put(v, 2); }
  void i16(int16_t v) { put(static_cast<uint16_t>(v), 2); }
  void u32(uint32_t v) { put(v, 4); }
  void u64(uint64_t v) { put(v, 8); }
  void raw(std::span<const uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  /// u8 length prefix, at most 255 bytes.
  void short_string(std::string_view s) {
    if (s.size() > 255) throw std::length_error("short_string longer than 255 bytes");
    u8(static_cast<uint8_t>(s.size()));
    raw(s);
  }
  /// u32 length prefix.
  void blob(std::span<const uint8_t> bytes) {
    u32(static_cast<uint32_t>(bytes.size()));
    raw(bytes);
  }

  std::vector<uint8_t>& bytes() { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }

 private:
  void put(uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8() { return static_cast<uint8_t>(get(1)); }
  uint16_t u16() { return static_cast<uint16_t>(get(2)); }
  int16_t i16() { return static_cast<int16_t>(get(2)); }
  uint32_t u32() { return static_cast<uint32_t>(get(4)); }
  uint64_t u64() { return get(8); }

  std::span<const uint8_t> raw(size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::string short_string() {
    const auto n = u8();
    auto s = raw(n);
    return std::string(s.begin(), s.end());
  }
  std::span<const uint8_t> blob() { return raw(u32()); }

  void expect_magic(std::string_view magic) {
    auto got = raw(magic.size());
    if (std::memcmp(got.data(), magic.data(), magic.size()) != 0)
      throw FormatError("bad magic, expected " + std::string(magic));
  }

  size_t remaining() const { return data_.size() - pos_; }
  size_t position() const { return pos_; }

 private:
  void need(size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("truncated input");
  }
  uint64_t get(int n) {
    need(static_cast<size_t>(n));
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<size_t>(n);
    return v;
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

/// FNV-1a, stable across platforms.
inline uint64_t fnv1a64(std::span<const uint8_t> bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace dcg
