#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "fedcbmir/bytes.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/weights.hpp"

namespace fedcbmir {

// Weight blob:
//   "FCWB" | version u16 | layout-id u64 | count u32 | count x f32
// All integers and floats little-endian. An empty blob is 18 bytes.
inline constexpr std::string_view kWeightsMagic = "FCWB";
inline constexpr std::uint16_t kWeightsVersion = 1;
inline constexpr std::size_t kWeightsHeaderSize = 4 + 2 + 8 + 4;

inline Bytes serialize_weights(const ModelWeights& w) {
  if (w.values.size() > 0xffffffffULL) throw ContractError("too many weights for FCWB");
  Bytes out;
  out.reserve(kWeightsHeaderSize + 4 * w.values.size());
  ByteWriter wr(out);
  wr.raw(kWeightsMagic);
  wr.le(kWeightsVersion);
  wr.le(w.layout_id);
  wr.le(static_cast<std::uint32_t>(w.values.size()));
  for (float v : w.values) wr.f32_le(v);
  return out;
}

// Decodes a weight blob. When `expected_layout` is set the embedded layout-id
// must equal it.
inline ModelWeights deserialize_weights(std::span<const std::uint8_t> bytes,
                                        std::optional<LayoutId> expected_layout = std::nullopt) {
  ByteReader rd(bytes, "weights");
  auto magic = rd.take(4);
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != kWeightsMagic) {
    throw DecodeError(DecodeFault::bad_magic, "weights: expected FCWB");
  }
  const auto version = rd.le<std::uint16_t>();
  if (version != kWeightsVersion) {
    throw DecodeError(DecodeFault::bad_version, "weights: version " + std::to_string(version));
  }
  ModelWeights w;
  w.layout_id = rd.le<std::uint64_t>();
  if (expected_layout && *expected_layout != w.layout_id) {
    throw DecodeError(DecodeFault::layout_mismatch, "weights: layout-id does not match the model");
  }
  const auto count = rd.le<std::uint32_t>();
  if (rd.remaining() < 4ULL * count) {
    throw DecodeError(DecodeFault::truncated, "weights: header declares " + std::to_string(count) +
                                                  " values, payload holds " +
                                                  std::to_string(rd.remaining() / 4));
  }
  if (rd.remaining() != 4ULL * count) {
    throw DecodeError(DecodeFault::length_mismatch,
                      "weights: " + std::to_string(rd.remaining() - 4ULL * count) +
                          " trailing bytes");
  }
  w.values.resize(count);
  for (auto& v : w.values) v = rd.f32_le();
  return w;
}

// LOCAL_UPDATE body: n_k u64 | mean-loss f64 | weight blob (little-endian).
struct UpdateBody {
  std::uint64_t n_k = 0;
  double mean_loss = 0.0;
  ModelWeights weights;
};

inline Bytes encode_update_body(const UpdateBody& u) {
  Bytes out;
  ByteWriter wr(out);
  wr.le(u.n_k);
  wr.f64_le(u.mean_loss);
  wr.raw(serialize_weights(u.weights));
  return out;
}

inline UpdateBody decode_update_body(std::span<const std::uint8_t> bytes,
                                     std::optional<LayoutId> expected_layout = std::nullopt) {
  ByteReader rd(bytes, "update body");
  UpdateBody u;
  u.n_k = rd.le<std::uint64_t>();
  u.mean_loss = rd.f64_le();
  u.weights = deserialize_weights(rd.take(rd.remaining()), expected_layout);
  return u;
}

}  // namespace fedcbmir
