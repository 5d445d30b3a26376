#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fedcbmir/data/types.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/io.hpp"
#include "fedcbmir/weights.hpp"

namespace fedcbmir {

struct ImageRecord {
  std::string id;
  std::string path;  // as written in the manifest
  Label label = Label::benign;
  Magnification magnification = Magnification::none;
  std::string center;
  Split split = Split::train;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

using StatsKey = std::tuple<Label, Magnification, Split>;

struct ManifestStats {
  std::map<StatsKey, std::size_t> counts;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [k, c] : counts) n += c;
    return n;
  }

  std::size_t count(Label l) const {
    std::size_t n = 0;
    for (const auto& [k, c] : counts) n += std::get<0>(k) == l ? c : 0;
    return n;
  }

  std::size_t count(Magnification m) const {
    std::size_t n = 0;
    for (const auto& [k, c] : counts) n += std::get<1>(k) == m ? c : 0;
    return n;
  }

  std::size_t count(Split s) const {
    std::size_t n = 0;
    for (const auto& [k, c] : counts) n += std::get<2>(k) == s ? c : 0;
    return n;
  }

  std::size_t count(Label l, Magnification m) const {
    std::size_t n = 0;
    for (const auto& [k, c] : counts) n += std::get<0>(k) == l && std::get<1>(k) == m ? c : 0;
    return n;
  }

  friend bool operator==(const ManifestStats&, const ManifestStats&) = default;
};

inline ManifestStats compute_stats(const std::vector<ImageRecord>& records) {
  ManifestStats s;
  for (const auto& r : records) ++s.counts[{r.label, r.magnification, r.split}];
  return s;
}

struct DatasetManifest {
  std::vector<ImageRecord> records;
  ManifestStats stats;
  std::filesystem::path base_dir;  // relative record paths resolve against this

  std::filesystem::path resolve(const ImageRecord& r) const {
    std::filesystem::path p(r.path);
    return p.is_absolute() ? p : base_dir / p;
  }

  std::vector<ImageRecord> select(std::initializer_list<Split> splits) const {
    std::vector<ImageRecord> out;
    for (const auto& r : records) {
      for (auto s : splits) {
        if (r.split == s) {
          out.push_back(r);
          break;
        }
      }
    }
    return out;
  }

  DatasetManifest subset(std::initializer_list<Split> splits) const {
    DatasetManifest m{select(splits), {}, base_dir};
    m.stats = compute_stats(m.records);
    return m;
  }
};

inline constexpr const char* kManifestHeader = "id,path,label,magnification,center,split";

// Used when a row leaves the split empty: 70/15/15 by a hash of the id.
inline Split default_split(const std::string& id) {
  const auto bucket = fnv1a64(id) % 100;
  if (bucket < 70) return Split::train;
  if (bucket < 85) return Split::validation;
  return Split::test;
}

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw DataError("unterminated quote");
  return fields;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline DatasetManifest parse_manifest(const std::string& text, std::filesystem::path base_dir = {}) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != kManifestHeader) {
        throw ManifestError(lineno, std::string("expected header '") + kManifestHeader + "'");
      }
      header = true;
      continue;
    }
    std::vector<std::string> f;
    try {
      f = detail::split_csv_row(line);
    } catch (const DataError& e) {
      throw ManifestError(lineno, e.what());
    }
    if (f.size() != 6) {
      throw ManifestError(lineno, "expected 6 fields, found " + std::to_string(f.size()));
    }
    for (auto& x : f) x = detail::trim(x);
    ImageRecord r;
    r.id = f[0];
    r.path = f[1];
    if (r.id.empty()) throw ManifestError(lineno, "empty id");
    if (r.path.empty()) throw ManifestError(lineno, "empty path");
    try {
      r.label = parse_label(f[2]);
      r.magnification = parse_magnification(f[3]);
      r.split = f[5].empty() ? default_split(r.id) : parse_split(f[5]);
    } catch (const DataError& e) {
      throw ManifestError(lineno, e.what());
    }
    r.center = f[4];
    if (auto [it, fresh] = seen.emplace(r.id, lineno); !fresh) {
      throw ManifestError(lineno, "duplicate id '" + r.id + "' (first on line " +
                                      std::to_string(it->second) + ")");
    }
    m.records.push_back(std::move(r));
  }
  if (!header) throw ManifestError(1, "missing header");
  m.stats = compute_stats(m.records);
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_text(path), path.parent_path());
}

inline std::string format_manifest(const std::vector<ImageRecord>& records) {
  std::string out = std::string(kManifestHeader) + "\n";
  for (const auto& r : records) {
    out += detail::csv_field(r.id) + "," + detail::csv_field(r.path) + "," + to_string(r.label) +
           "," + to_string(r.magnification) + "," + detail::csv_field(r.center) + "," +
           to_string(r.split) + "\n";
  }
  return out;
}

inline void save_manifest(const std::filesystem::path& path, const std::vector<ImageRecord>& records) {
  write_text(path, format_manifest(records));
}

}  // namespace fedcbmir
