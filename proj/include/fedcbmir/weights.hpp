#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedcbmir/errors.hpp"
#include "fedcbmir/numerics/tensor.hpp"

namespace fedcbmir {

using LayoutId = std::uint64_t;

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct LayerShape {
  std::string name;
  Shape shape;
  std::size_t offset = 0;  // into the flat parameter vector
};

// Ordered parameter layout. The order is part of the serialized format:
// reordering layers changes the layout-id.
class Layout {
 public:
  static constexpr std::string_view kVersionTag = "fedcbmir-layout-v1";

  void add(std::string name, Shape shape) {
    const std::size_t n = element_count(shape);
    layers_.push_back(LayerShape{std::move(name), std::move(shape), total_});
    total_ += n;
  }

  const std::vector<LayerShape>& layers() const { return layers_; }
  std::size_t total() const { return total_; }

  const LayerShape& layer(std::string_view name) const {
    for (const auto& l : layers_) {
      if (l.name == name) return l;
    }
    throw ContractError("no layer named " + std::string(name));
  }

  // Name of the layer owning flat parameter index i.
  const std::string& layer_of(std::size_t i) const {
    for (const auto& l : layers_) {
      if (i >= l.offset && i < l.offset + element_count(l.shape)) return l.name;
    }
    throw ContractError("parameter index " + std::to_string(i) + " out of range");
  }

  LayoutId id() const {
    std::uint64_t h = fnv1a64(kVersionTag);
    for (const auto& l : layers_) {
      h = fnv1a64(l.name, h);
      h = fnv1a64(":", h);
      for (auto d : l.shape) h = fnv1a64(std::to_string(d) + ",", h);
      h = fnv1a64(";", h);
    }
    return h;
  }

 private:
  std::vector<LayerShape> layers_;
  std::size_t total_ = 0;
};

// The unit the federation exchanges: flat parameters tagged with the layout
// they belong to. Stored and transmitted as 32-bit; the 64-bit variant exists
// for exact-arithmetic checks.
template <class T>
struct BasicWeights {
  LayoutId layout_id = 0;
  std::vector<T> values;

  friend bool operator==(const BasicWeights&, const BasicWeights&) = default;
};

using ModelWeights = BasicWeights<float>;

}  // namespace fedcbmir
