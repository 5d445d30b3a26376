#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedcbmir/errors.hpp"

namespace fedcbmir {

using Bytes = std::vector<std::uint8_t>;

// Appends fixed-width integers in an explicit byte order.
class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void raw(std::span<const std::uint8_t> s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }

  template <class U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  template <class U>
  void be(U v) {
    for (std::size_t i = sizeof(U); i-- > 0;) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32_le(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  void f64_le(double v) { le(std::bit_cast<std::uint64_t>(v)); }

  // u16 little-endian length prefix, then the bytes.
  void str16(std::string_view s) {
    if (s.size() > 0xffff) throw ContractError("string longer than 65535 bytes");
    le(static_cast<std::uint16_t>(s.size()));
    raw(s);
  }

 private:
  Bytes& out_;
};

// Bounds-checked cursor; running off the end throws DecodeError(truncated).
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in, std::string what = "input")
      : in_(in), what_(std::move(what)) {}

  std::size_t remaining() const { return in_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (remaining() < n) {
      throw DecodeError(DecodeFault::truncated, what_ + ": need " + std::to_string(n) +
                                                    " bytes at offset " + std::to_string(pos_) +
                                                    ", have " + std::to_string(remaining()));
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint8_t u8() { return take(1)[0]; }

  template <class U>
  U le() {
    auto s = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(s[i]) << (8 * i));
    return v;
  }
  template <class U>
  U be() {
    auto s = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v = static_cast<U>((v << 8) | s[i]);
    return v;
  }
  float f32_le() { return std::bit_cast<float>(le<std::uint32_t>()); }
  double f64_le() { return std::bit_cast<double>(le<std::uint64_t>()); }

  std::string str16() {
    const auto n = le<std::uint16_t>();
    auto s = take(n);
    return std::string(s.begin(), s.end());
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace fedcbmir
