#pragma once

#include <cstddef>
#include <vector>

#include "fedcbmir/errors.hpp"
#include "fedcbmir/numerics/tensor.hpp"

namespace fedcbmir {

struct PatchRule {
  std::size_t patch_size = 224;
  double tissue_threshold = 0.70;
  double background_cutoff = 0.85;  // mean channel value at or above this is background
};

struct Patch {
  std::size_t row = 0;  // top-left pixel
  std::size_t col = 0;
  double tissue_fraction = 0.0;
  Tensor<float> pixels;
};

// Fraction of pixels in the tile whose channel mean lies below the cutoff.
inline double tissue_fraction(const Tensor<float>& image, std::size_t row, std::size_t col,
                              std::size_t size, double cutoff) {
  const std::size_t c = image.dim(0);
  std::size_t fg = 0;
  for (std::size_t y = row; y < row + size; ++y) {
    for (std::size_t x = col; x < col + size; ++x) {
      double s = 0.0;
      for (std::size_t k = 0; k < c; ++k) s += image.at(k, y, x);
      fg += s / static_cast<double>(c) < cutoff;
    }
  }
  return static_cast<double>(fg) / static_cast<double>(size * size);
}

// Non-overlapping row-major tiling; edge remainders are cropped. A tile is
// kept when its tissue fraction reaches the threshold.
inline std::vector<Patch> patchify(const Tensor<float>& image, const PatchRule& rule = {}) {
  if (image.rank() != 3) throw DimensionError("patchify: expected [C,H,W], got " + to_string(image.shape()));
  const std::size_t h = image.dim(1), w = image.dim(2), p = rule.patch_size;
  if (p == 0 || p > h || p > w) {
    throw ContractError("patchify: patch size " + std::to_string(p) + " does not fit a " +
                        std::to_string(h) + "x" + std::to_string(w) + " image");
  }
  std::vector<Patch> out;
  for (std::size_t r = 0; r + p <= h; r += p) {
    for (std::size_t c = 0; c + p <= w; c += p) {
      const double frac = tissue_fraction(image, r, c, p, rule.background_cutoff);
      if (frac < rule.tissue_threshold) continue;
      Tensor<float> tile({image.dim(0), p, p});
      for (std::size_t k = 0; k < image.dim(0); ++k) {
        for (std::size_t y = 0; y < p; ++y) {
          for (std::size_t x = 0; x < p; ++x) tile.at(k, y, x) = image.at(k, r + y, c + x);
        }
      }
      out.push_back({r, c, frac, std::move(tile)});
    }
  }
  return out;
}

// Number of candidate tiles before filtering.
inline std::size_t tile_count(std::size_t height, std::size_t width, std::size_t patch) {
  return patch == 0 ? 0 : (height / patch) * (width / patch);
}

}  // namespace fedcbmir
