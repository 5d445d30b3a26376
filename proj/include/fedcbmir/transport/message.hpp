#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedcbmir/bytes.hpp"
#include "fedcbmir/errors.hpp"

namespace fedcbmir {

enum class MessageType : std::uint8_t {
  join = 1,
  global_weights = 2,
  local_update = 3,
  round_done = 4,
  abort = 5,
};

inline const char* to_string(MessageType t) {
  switch (t) {
    case MessageType::join: return "JOIN";
    case MessageType::global_weights: return "GLOBAL_WEIGHTS";
    case MessageType::local_update: return "LOCAL_UPDATE";
    case MessageType::round_done: return "ROUND_DONE";
    case MessageType::abort: return "ABORT";
  }
  return "?";
}

inline bool carries_body(MessageType t) {
  return t == MessageType::global_weights || t == MessageType::local_update;
}

struct Message {
  MessageType type = MessageType::join;
  std::uint32_t round = 0;
  std::string client_id;
  Bytes body;

  friend bool operator==(const Message&, const Message&) = default;
};

// Frame: total-length u32 | type u8 | round u32 | id-length u16 | id | body.
// Integers are big-endian; total-length counts the whole frame including
// itself.
inline constexpr std::size_t kFrameHeaderSize = 4 + 1 + 4 + 2;
inline constexpr std::size_t kMaxFrameSize = std::size_t{1} << 30;

inline Bytes encode_message(const Message& m) {
  if (carries_body(m.type) == m.body.empty()) {
    throw ContractError(std::string("message ") + to_string(m.type) +
                        (m.body.empty() ? " requires a body" : " must not carry a body"));
  }
  if (m.client_id.size() > 0xffff) throw ContractError("client id longer than 65535 bytes");
  const std::size_t total = kFrameHeaderSize + m.client_id.size() + m.body.size();
  if (total > kMaxFrameSize) throw ContractError("frame exceeds the maximum size");
  Bytes out;
  out.reserve(total);
  ByteWriter wr(out);
  wr.be(static_cast<std::uint32_t>(total));
  wr.u8(static_cast<std::uint8_t>(m.type));
  wr.be(m.round);
  wr.be(static_cast<std::uint16_t>(m.client_id.size()));
  wr.raw(m.client_id);
  wr.raw(m.body);
  return out;
}

namespace detail {

inline Message decode_frame_at(ByteReader& rd, std::size_t frame_start, std::size_t available) {
  const auto total = rd.be<std::uint32_t>();
  if (total < kFrameHeaderSize) {
    throw DecodeError(DecodeFault::length_mismatch,
                      "frame length " + std::to_string(total) + " shorter than its header");
  }
  if (total > kMaxFrameSize) {
    throw DecodeError(DecodeFault::length_mismatch, "frame length " + std::to_string(total) +
                                                        " exceeds the maximum");
  }
  if (available - frame_start < total) {
    throw DecodeError(DecodeFault::truncated, "frame declares " + std::to_string(total) +
                                                  " bytes, stream holds " +
                                                  std::to_string(available - frame_start));
  }
  Message m;
  const auto type = rd.u8();
  if (type < 1 || type > 5) {
    throw DecodeError(DecodeFault::unknown_type, "type byte " + std::to_string(type));
  }
  m.type = static_cast<MessageType>(type);
  m.round = rd.be<std::uint32_t>();
  const auto id_len = rd.be<std::uint16_t>();
  if (kFrameHeaderSize + id_len > total) {
    throw DecodeError(DecodeFault::length_mismatch, "client id runs past the frame end");
  }
  auto id = rd.take(id_len);
  m.client_id.assign(id.begin(), id.end());
  auto body = rd.take(total - kFrameHeaderSize - id_len);
  m.body.assign(body.begin(), body.end());
  if (carries_body(m.type) == m.body.empty()) {
    throw DecodeError(DecodeFault::malformed, std::string(to_string(m.type)) +
                                                  (m.body.empty() ? " without body" : " with body"));
  }
  return m;
}

}  // namespace detail

// Decodes exactly one frame; trailing bytes are a length mismatch.
inline Message decode_message(std::span<const std::uint8_t> bytes) {
  ByteReader rd(bytes, "frame");
  auto m = detail::decode_frame_at(rd, 0, bytes.size());
  if (rd.remaining() != 0) {
    throw DecodeError(DecodeFault::length_mismatch,
                      std::to_string(rd.remaining()) + " bytes after the frame");
  }
  return m;
}

// Splits a buffer of concatenated frames.
inline std::vector<Message> decode_stream(std::span<const std::uint8_t> bytes) {
  ByteReader rd(bytes, "frame stream");
  std::vector<Message> out;
  while (rd.remaining() > 0) out.push_back(detail::decode_frame_at(rd, rd.position(), bytes.size()));
  return out;
}

}  // namespace fedcbmir
