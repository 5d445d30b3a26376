#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedcbmir/data/types.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/retrieval/search.hpp"

namespace fedcbmir {

enum class PredictionRule { majority, top1 };

inline const char* to_string(PredictionRule r) { return r == PredictionRule::majority ? "majority" : "top1"; }

// Majority label over the hits. A tie goes to the tied label owning the
// nearest hit, so only the distance ranking matters, not the list order.
inline Label predict_label(std::span<const Hit> hits, PredictionRule rule = PredictionRule::majority) {
  if (hits.empty()) throw ContractError("predict_label: no hits");
  struct Tally {
    std::size_t votes = 0;
    const Hit* nearest = nullptr;
  };
  auto closer = [](const Hit& a, const Hit& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.position < b.position);
  };
  Tally tally[kAllLabels.size()];
  const Hit* nearest = &hits.front();
  for (const auto& h : hits) {
    auto& t = tally[static_cast<std::size_t>(h.label)];
    ++t.votes;
    if (!t.nearest || closer(h, *t.nearest)) t.nearest = &h;
    if (closer(h, *nearest)) nearest = &h;
  }
  if (rule == PredictionRule::top1) return nearest->label;
  std::size_t best = 0;
  for (std::size_t i = 1; i < kAllLabels.size(); ++i) {
    const auto& a = tally[i];
    const auto& b = tally[best];
    if (a.votes > b.votes || (a.votes == b.votes && a.votes > 0 && closer(*a.nearest, *b.nearest))) {
      best = i;
    }
  }
  return kAllLabels[best];
}

struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::string positive = "malignant";

  std::size_t total() const { return tp + fp + fn + tn; }

  void add(Label truth, Label predicted) {
    const bool t = is_positive(truth), p = is_positive(predicted);
    if (t && p) ++tp;
    else if (!t && p) ++fp;
    else if (t && !p) ++fn;
    else ++tn;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // tp + fp == 0, reported as 0
  bool recall_undefined = false;     // tp + fn == 0, reported as 0
  bool f1_undefined = false;         // precision + recall == 0, reported as 0

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline Metrics metrics(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) throw ContractError("metrics: empty confusion matrix");
  Metrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(n);
  if (cm.tp + cm.fp == 0) {
    m.precision_undefined = true;
  } else {
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn == 0) {
    m.recall_undefined = true;
  } else {
    m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  }
  if (m.precision + m.recall == 0.0) {
    m.f1_undefined = true;
  } else {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return m;
}

struct TimingSummary {
  double mean = 0.0;
  double p95 = 0.0;
};

// Arithmetic mean and nearest-rank 95th percentile.
inline TimingSummary timing_summary(std::span<const double> seconds) {
  if (seconds.empty()) throw ContractError("timing_summary: no records");
  std::vector<double> s(seconds.begin(), seconds.end());
  std::sort(s.begin(), s.end());
  double sum = 0.0;
  for (double v : s) sum += v;
  const std::size_t rank = (95 * s.size() + 99) / 100;  // ceil(0.95 n), n >= 1
  return {sum / static_cast<double>(s.size()), s[rank - 1]};
}

}  // namespace fedcbmir
