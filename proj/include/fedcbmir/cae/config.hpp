#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedcbmir/errors.hpp"

namespace fedcbmir {

// Convolutional autoencoder hyperparameters. Defaults are the published
// architecture at a 64x64 desk-scale input.
struct CaeConfig {
  std::size_t channels = 3;
  std::size_t height = 64;
  std::size_t width = 64;
  // One stride-2 3x3 convolution per entry.
  std::vector<std::size_t> encoder_filters{32, 64, 128, 256};
  // 1x1 reduce, 3x3, 1x1 projection back to the encoder width.
  std::vector<std::size_t> residual_filters{64, 32, 256};
  std::size_t bottleneck_dim = 200;
  // One stride-2 4x4 transposed convolution per entry; the last must equal
  // `channels`.
  std::vector<std::size_t> decoder_filters{128, 64, 32, 3};
  std::uint64_t seed = 0;

  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kDecoderKernel = 4;

  std::size_t stages() const { return encoder_filters.size(); }
  std::size_t grid_height() const { return height >> stages(); }
  std::size_t grid_width() const { return width >> stages(); }
  std::size_t grid_channels() const { return encoder_filters.back(); }
  std::size_t grid_size() const { return grid_channels() * grid_height() * grid_width(); }

  void validate() const {
    if (channels == 0) throw ConfigError("cae: channels must be positive");
    if (encoder_filters.empty()) throw ConfigError("cae: encoder needs at least one stage");
    for (auto f : encoder_filters) {
      if (f == 0) throw ConfigError("cae: encoder filter counts must be positive");
    }
    if (stages() >= 16) throw ConfigError("cae: too many encoder stages");
    const std::size_t div = std::size_t{1} << stages();
    if (height == 0 || width == 0 || height % div != 0 || width % div != 0) {
      throw ConfigError("cae: input " + std::to_string(height) + "x" + std::to_string(width) +
                        " is not divisible by " + std::to_string(div));
    }
    if (residual_filters.size() != 3) {
      throw ConfigError("cae: residual block takes exactly three filter counts");
    }
    for (auto f : residual_filters) {
      if (f == 0) throw ConfigError("cae: residual filter counts must be positive");
    }
    if (residual_filters.back() != encoder_filters.back()) {
      throw ConfigError("cae: residual projection (" + std::to_string(residual_filters.back()) +
                        ") must match the encoder output width (" +
                        std::to_string(encoder_filters.back()) + ")");
    }
    if (bottleneck_dim == 0) throw ConfigError("cae: bottleneck_dim must be positive");
    if (decoder_filters.size() != encoder_filters.size()) {
      throw ConfigError("cae: decoder needs as many stages as the encoder");
    }
    for (auto f : decoder_filters) {
      if (f == 0) throw ConfigError("cae: decoder filter counts must be positive");
    }
    if (decoder_filters.back() != channels) {
      throw ConfigError("cae: last decoder stage must produce " + std::to_string(channels) +
                        " channels");
    }
  }

  friend bool operator==(const CaeConfig&, const CaeConfig&) = default;
};

}  // namespace fedcbmir
