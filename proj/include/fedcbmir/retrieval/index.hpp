#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedcbmir/bytes.hpp"
#include "fedcbmir/data/types.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/io.hpp"
#include "fedcbmir/weights.hpp"

namespace fedcbmir {

inline constexpr std::size_t kFeatureDim = 200;

struct IndexEntry {
  std::string id;
  std::vector<float> vector;
  Label label = Label::benign;
  Magnification magnification = Magnification::none;
  std::string center;
  Split split = Split::train;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

// The feature dictionary. Immutable once built; bound to the encoder layout
// that produced its vectors.
class FeatureIndex {
 public:
  FeatureIndex() = default;
  FeatureIndex(LayoutId layout_id, std::vector<IndexEntry> entries)
      : layout_id_(layout_id), entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.vector.size() != kFeatureDim) {
        throw IndexError("entry " + e.id + " has " + std::to_string(e.vector.size()) +
                         " features, expected " + std::to_string(kFeatureDim));
      }
      if (e.split == Split::test) throw IndexError("test-split image " + e.id + " in the index");
      if (!positions_.emplace(e.id, i).second) throw IndexError("duplicate index id " + e.id);
    }
  }

  LayoutId layout_id() const { return layout_id_; }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(const std::string& id) const { return positions_.count(id) != 0; }
  const IndexEntry* find(const std::string& id) const {
    auto it = positions_.find(id);
    return it == positions_.end() ? nullptr : &entries_[it->second];
  }

  std::size_t count(Label l) const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.label == l;
    return n;
  }
  std::size_t count(Magnification m) const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.magnification == m;
    return n;
  }

  friend bool operator==(const FeatureIndex& a, const FeatureIndex& b) {
    return a.layout_id_ == b.layout_id_ && a.entries_ == b.entries_;
  }

 private:
  LayoutId layout_id_ = 0;
  std::vector<IndexEntry> entries_;
  std::map<std::string, std::size_t> positions_;
};

// sqrt(sum (a_i - b_i)^2), accumulated in double.
inline double euclidean(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DimensionError("euclidean: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

// Index file:
//   "FCIX" | version u16 | layout-id u64 | count u32 | entries
// entry: id str16 | label u8 | magnification u8 | center str16 | split u8 |
//        200 x f32.  Little-endian; str16 is a u16 byte length then UTF-8.
inline constexpr std::string_view kIndexMagic = "FCIX";
inline constexpr std::uint16_t kIndexVersion = 1;

inline Bytes serialize_index(const FeatureIndex& index) {
  Bytes out;
  ByteWriter wr(out);
  wr.raw(kIndexMagic);
  wr.le(kIndexVersion);
  wr.le(index.layout_id());
  wr.le(static_cast<std::uint32_t>(index.size()));
  for (const auto& e : index.entries()) {
    wr.str16(e.id);
    wr.u8(static_cast<std::uint8_t>(e.label));
    wr.u8(static_cast<std::uint8_t>(e.magnification));
    wr.str16(e.center);
    wr.u8(static_cast<std::uint8_t>(e.split));
    for (float v : e.vector) wr.f32_le(v);
  }
  return out;
}

inline FeatureIndex deserialize_index(std::span<const std::uint8_t> bytes) {
  ByteReader rd(bytes, "index");
  auto magic = rd.take(4);
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 4) != kIndexMagic) {
    throw DecodeError(DecodeFault::bad_magic, "index: expected FCIX");
  }
  const auto version = rd.le<std::uint16_t>();
  if (version != kIndexVersion) {
    throw DecodeError(DecodeFault::bad_version, "index: version " + std::to_string(version));
  }
  const auto layout = rd.le<std::uint64_t>();
  const auto count = rd.le<std::uint32_t>();
  std::vector<IndexEntry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    try {
      IndexEntry e;
      e.id = rd.str16();
      e.label = label_from_code(rd.u8());
      e.magnification = magnification_from_code(rd.u8());
      e.center = rd.str16();
      e.split = split_from_code(rd.u8());
      e.vector.resize(kFeatureDim);
      for (auto& v : e.vector) v = rd.f32_le();
      entries.push_back(std::move(e));
    } catch (const DecodeError& err) {
      throw DecodeError(err.fault, "index entry " + std::to_string(i) + " of " +
                                       std::to_string(count) + ": " + err.what());
    } catch (const DataError& err) {
      throw DecodeError(DecodeFault::malformed,
                        "index entry " + std::to_string(i) + ": " + err.what());
    }
  }
  if (rd.remaining() != 0) {
    throw DecodeError(DecodeFault::length_mismatch,
                      "index: " + std::to_string(rd.remaining()) + " trailing bytes");
  }
  return FeatureIndex(layout, std::move(entries));
}

inline void save_index(const FeatureIndex& index, const std::filesystem::path& path) {
  write_file(path, serialize_index(index));
}

inline FeatureIndex load_index(const std::filesystem::path& path) {
  return deserialize_index(read_file(path));
}

}  // namespace fedcbmir
