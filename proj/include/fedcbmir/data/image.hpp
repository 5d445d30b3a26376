#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>

#include "fedcbmir/bytes.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/io.hpp"
#include "fedcbmir/numerics/tensor.hpp"

namespace fedcbmir {

// 8-bit interleaved RGB.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  Bytes pixels;  // height * width * 3
};

namespace detail {

inline bool is_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return b.size() >= 8 && std::memcmp(b.data(), sig, 8) == 0;
}

inline RgbImage decode_png(std::span<const std::uint8_t> bytes, const std::string& what) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw LoadError(what + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;  // gray is replicated, alpha dropped
  RgbImage out{img.width, img.height, Bytes(PNG_IMAGE_SIZE(img))};
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw LoadError(what + ": " + msg);
  }
  return out;
}

// Binary PPM (P6), maxval up to 65535. Samples are rescaled to 8 bits.
inline RgbImage decode_ppm(std::span<const std::uint8_t> bytes, const std::string& what) {
  std::size_t pos = 2;
  auto next_int = [&]() -> std::size_t {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw LoadError(what + ": bad PPM header");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1u << 24)) throw LoadError(what + ": PPM header value too large");
    }
    return v;
  };
  const auto w = next_int();
  const auto h = next_int();
  const auto maxval = next_int();
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw LoadError(what + ": bad PPM header");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw LoadError(what + ": bad PPM header");
  ++pos;
  const std::size_t bps = maxval < 256 ? 1 : 2;
  const std::size_t need = w * h * 3 * bps;
  if (bytes.size() - pos < need) throw LoadError(what + ": truncated PPM data");
  RgbImage out{w, h, Bytes(w * h * 3)};
  for (std::size_t i = 0; i < w * h * 3; ++i) {
    const std::size_t v = bps == 1 ? bytes[pos + i]
                                   : (std::size_t{bytes[pos + 2 * i]} << 8) | bytes[pos + 2 * i + 1];
    out.pixels[i] = static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  }
  return out;
}

}  // namespace detail

inline RgbImage decode_image(std::span<const std::uint8_t> bytes, const std::string& what = "image") {
  if (detail::is_png(bytes)) return detail::decode_png(bytes, what);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return detail::decode_ppm(bytes, what);
  throw LoadError(what + ": not a PNG or binary PPM file");
}

// Channel-major [3, H, W] in [0, 1].
template <class T = float>
Tensor<T> to_tensor(const RgbImage& img) {
  Tensor<T> t({3, img.height, img.width});
  const std::size_t plane = img.width * img.height;
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      t[c * plane + p] = static_cast<T>(img.pixels[p * 3 + c]) / T{255};
    }
  }
  return t;
}

template <class T>
RgbImage from_tensor(const Tensor<T>& t) {
  if (t.rank() != 3 || t.dim(0) != 3) throw DimensionError("from_tensor: expected [3,H,W], got " + to_string(t.shape()));
  RgbImage img{t.dim(2), t.dim(1), Bytes(t.size())};
  const std::size_t plane = img.width * img.height;
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(t[c * plane + p]), 0.0, 1.0);
      img.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return img;
}

template <class T = float>
Tensor<T> decode_image_tensor(std::span<const std::uint8_t> bytes, const std::string& what = "image") {
  return to_tensor<T>(decode_image(bytes, what));
}

template <class T = float>
Tensor<T> load_image(const std::filesystem::path& path) {
  Bytes bytes;
  try {
    bytes = read_file(path);
  } catch (const IoError&) {
    throw LoadError("cannot read image " + path.string());
  }
  return decode_image_tensor<T>(bytes, path.string());
}

inline Bytes encode_png(const RgbImage& img) {
  png_image p;
  std::memset(&p, 0, sizeof p);
  p.version = PNG_IMAGE_VERSION;
  p.width = static_cast<png_uint_32>(img.width);
  p.height = static_cast<png_uint_32>(img.height);
  p.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&p, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("png encode: ") + p.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&p, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("png encode: ") + p.message);
  }
  out.resize(size);
  return out;
}

inline Bytes encode_ppm(const RgbImage& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

template <class T>
void save_png(const std::filesystem::path& path, const Tensor<T>& t) {
  write_file(path, encode_png(from_tensor(t)));
}

}  // namespace fedcbmir
