#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <string>

#include "fedcbmir/errors.hpp"

namespace fedcbmir {

// Binary labels of the two corpora. Malignant and cancerous are positive.
enum class Label : std::uint8_t { benign = 0, malignant = 1, non_cancerous = 2, cancerous = 3 };

inline constexpr std::array<Label, 4> kAllLabels{Label::benign, Label::malignant,
                                                 Label::non_cancerous, Label::cancerous};

inline bool is_positive(Label l) { return l == Label::malignant || l == Label::cancerous; }

inline const char* to_string(Label l) {
  switch (l) {
    case Label::benign: return "benign";
    case Label::malignant: return "malignant";
    case Label::non_cancerous: return "non-cancerous";
    case Label::cancerous: return "cancerous";
  }
  return "?";
}

namespace detail {
inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}
}  // namespace detail

inline Label parse_label(const std::string& text) {
  const auto s = detail::lower(text);
  if (s == "benign" || s == "b") return Label::benign;
  if (s == "malignant" || s == "m") return Label::malignant;
  if (s == "non-cancerous" || s == "non_cancerous" || s == "noncancerous") return Label::non_cancerous;
  if (s == "cancerous") return Label::cancerous;
  throw DataError("unknown label '" + text + "'");
}

inline Label label_from_code(std::uint8_t c) {
  if (c > 3) throw DataError("label code " + std::to_string(c));
  return static_cast<Label>(c);
}

enum class Magnification : std::uint8_t { x40 = 0, x100 = 1, x200 = 2, x400 = 3, none = 4 };

// Order used for Sen2 groups.
inline constexpr std::array<Magnification, 5> kMagnificationOrder{
    Magnification::x40, Magnification::x100, Magnification::x200, Magnification::x400,
    Magnification::none};

inline const char* to_string(Magnification m) {
  switch (m) {
    case Magnification::x40: return "40x";
    case Magnification::x100: return "100x";
    case Magnification::x200: return "200x";
    case Magnification::x400: return "400x";
    case Magnification::none: return "none";
  }
  return "?";
}

// Accepts 40, 40x, 40X, "40×" and none/empty.
inline Magnification parse_magnification(const std::string& text) {
  auto s = detail::lower(text);
  const std::string times = "\xc3\x97";
  if (s.size() > times.size() && s.compare(s.size() - times.size(), times.size(), times) == 0) {
    s.erase(s.size() - times.size());
  }
  if (!s.empty() && s.back() == 'x') s.pop_back();
  if (s == "40") return Magnification::x40;
  if (s == "100") return Magnification::x100;
  if (s == "200") return Magnification::x200;
  if (s == "400") return Magnification::x400;
  if (s.empty() || s == "none" || s == "-") return Magnification::none;
  throw DataError("unknown magnification '" + text + "'");
}

inline Magnification magnification_from_code(std::uint8_t c) {
  if (c > 4) throw DataError("magnification code " + std::to_string(c));
  return static_cast<Magnification>(c);
}

enum class Split : std::uint8_t { train = 0, validation = 1, test = 2 };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& text) {
  const auto s = detail::lower(text);
  if (s == "train") return Split::train;
  if (s == "validation" || s == "val") return Split::validation;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + text + "'");
}

inline Split split_from_code(std::uint8_t c) {
  if (c > 2) throw DataError("split code " + std::to_string(c));
  return static_cast<Split>(c);
}

}  // namespace fedcbmir
