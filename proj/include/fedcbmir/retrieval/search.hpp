#pragma once

#include <algorithm>
#include <chrono>
#include <span>
#include <string>
#include <vector>

#include "fedcbmir/data/types.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/retrieval/index.hpp"

namespace fedcbmir {

// Sen1: only the query's magnification. Sen2: top-K in every magnification.
enum class Scenario { sen1, sen2 };

inline const char* to_string(Scenario s) { return s == Scenario::sen1 ? "sen1" : "sen2"; }

inline Scenario parse_scenario(const std::string& text) {
  const auto s = detail::lower(text);
  if (s == "sen1") return Scenario::sen1;
  if (s == "sen2") return Scenario::sen2;
  throw ConfigError("unknown scenario '" + text + "'");
}

struct Hit {
  std::string entry_id;
  std::size_t position = 0;  // insertion position in the index
  double distance = 0.0;
  Label label = Label::benign;
  Magnification magnification = Magnification::none;
  std::string center;

  friend bool operator==(const Hit&, const Hit&) = default;
};

struct RetrievalResult {
  std::string query_id;
  Scenario scenario = Scenario::sen1;
  std::size_t k = 0;
  std::vector<Hit> hits;  // Sen2: group after group, in magnification order
  double elapsed_seconds = 0.0;

  // Contiguous runs of one magnification, in order.
  std::vector<std::pair<Magnification, std::vector<Hit>>> groups() const {
    std::vector<std::pair<Magnification, std::vector<Hit>>> out;
    for (const auto& h : hits) {
      if (out.empty() || out.back().first != h.magnification) out.push_back({h.magnification, {}});
      out.back().second.push_back(h);
    }
    return out;
  }
};

namespace detail {

struct Candidate {
  double distance;
  std::size_t position;
};

// K smallest by (distance, position); equals a stable sort on distance.
inline std::vector<Candidate> top_k(std::vector<Candidate> c, std::size_t k) {
  auto less = [](const Candidate& a, const Candidate& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.position < b.position);
  };
  k = std::min(k, c.size());
  std::partial_sort(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(k), c.end(), less);
  c.resize(k);
  return c;
}

}  // namespace detail

// Exhaustive Euclidean search. The query's own id never appears in the hits.
inline RetrievalResult search(const FeatureIndex& index, std::span<const float> query, int k,
                              Scenario scenario, Magnification query_magnification,
                              const std::string& query_id = {}) {
  const auto start = std::chrono::steady_clock::now();
  if (k <= 0) throw ContractError("search: K must be positive, got " + std::to_string(k));
  if (query.size() != kFeatureDim) {
    throw DimensionError("search: query has " + std::to_string(query.size()) + " features");
  }
  RetrievalResult r{query_id, scenario, static_cast<std::size_t>(k), {}, 0.0};

  std::vector<detail::Candidate> by_group[kMagnificationOrder.size()];
  const auto& entries = index.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!query_id.empty() && e.id == query_id) continue;
    if (scenario == Scenario::sen1 && e.magnification != query_magnification) continue;
    by_group[static_cast<std::size_t>(e.magnification)].push_back({euclidean(query, e.vector), i});
  }

  auto emit = [&](const std::vector<detail::Candidate>& top) {
    for (const auto& c : top) {
      const auto& e = entries[c.position];
      r.hits.push_back({e.id, c.position, c.distance, e.label, e.magnification, e.center});
    }
  };
  if (scenario == Scenario::sen1) {
    auto& pool = by_group[static_cast<std::size_t>(query_magnification)];
    if (pool.empty()) {
      throw EmptyPartitionError(std::string("no index entries at magnification ") +
                                to_string(query_magnification));
    }
    emit(detail::top_k(std::move(pool), r.k));
  } else {
    for (auto m : kMagnificationOrder) {
      auto& pool = by_group[static_cast<std::size_t>(m)];
      if (!pool.empty()) emit(detail::top_k(std::move(pool), r.k));
    }
    if (r.hits.empty()) throw EmptyPartitionError("index has no searchable entries");
  }
  r.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace fedcbmir
