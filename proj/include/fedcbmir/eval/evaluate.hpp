#pragma once

#include <chrono>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedcbmir/cae/model.hpp"
#include "fedcbmir/data/manifest.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/eval/metrics.hpp"
#include "fedcbmir/retrieval/pipeline.hpp"

namespace fedcbmir {

struct EvalQuery {
  std::string id;
  std::vector<float> vector;
  Label truth = Label::benign;
  Magnification magnification = Magnification::none;
};

struct QueryRecord {
  std::string query_id;
  Label truth = Label::benign;
  Label predicted = Label::benign;
  double nearest_distance = 0.0;
  double seconds = 0.0;
};

struct EvalReport {
  Scenario scenario = Scenario::sen1;
  std::size_t k = 5;
  PredictionRule rule = PredictionRule::majority;
  ConfusionMatrix confusion;  // Sen2: pooled over all groups
  Metrics scores;
  TimingSummary timing;
  std::vector<QueryRecord> records;  // query order
  std::map<Magnification, ConfusionMatrix> group_confusion;  // Sen2 only
};

inline std::string positive_class_name(const FeatureIndex& index) {
  for (const auto& e : index.entries()) {
    if (e.label == Label::cancerous || e.label == Label::non_cancerous) return "cancerous";
  }
  return "malignant";
}

inline void guard_leakage(const FeatureIndex& index, const std::vector<std::string>& query_ids) {
  for (const auto& id : query_ids) {
    if (index.contains(id)) throw EvalError("query " + id + " is also in the index");
  }
}

namespace detail {

inline void finish_report(EvalReport& r) {
  ConfusionMatrix cm;
  cm.positive = r.confusion.positive;
  std::vector<double> secs;
  for (const auto& q : r.records) {
    cm.add(q.truth, q.predicted);
    secs.push_back(q.seconds);
  }
  r.confusion = cm;
  r.scores = metrics(cm);
  r.timing = timing_summary(secs);
}

// Per-query work shared by the vector and the image paths.
inline QueryRecord score_query(EvalReport& report, const RetrievalResult& res, Label truth) {
  QueryRecord rec{res.query_id, truth, predict_label(res.hits, report.rule), 0.0,
                  res.elapsed_seconds};
  double nearest = res.hits.front().distance;
  for (const auto& h : res.hits) nearest = std::min(nearest, h.distance);
  rec.nearest_distance = nearest;
  if (res.scenario == Scenario::sen2) {
    for (const auto& [mag, hits] : res.groups()) {
      auto& cm = report.group_confusion[mag];
      cm.positive = report.confusion.positive;
      cm.add(truth, predict_label(hits, report.rule));
    }
  }
  return rec;
}

}  // namespace detail

// Every query searched against the index; CM with malignant/cancerous as
// the positive class.
inline EvalReport evaluate_features(const FeatureIndex& index, const std::vector<EvalQuery>& queries,
                                    int k, Scenario scenario,
                                    PredictionRule rule = PredictionRule::majority) {
  if (queries.empty()) throw EvalError("no test queries");
  std::vector<std::string> ids;
  for (const auto& q : queries) ids.push_back(q.id);
  guard_leakage(index, ids);
  EvalReport report;
  report.scenario = scenario;
  report.k = static_cast<std::size_t>(std::max(k, 0));
  report.rule = rule;
  report.confusion.positive = positive_class_name(index);
  for (const auto& q : queries) {
    const auto res = search(index, q.vector, k, scenario, q.magnification, q.id);
    report.records.push_back(detail::score_query(report, res, q.truth));
  }
  detail::finish_report(report);
  return report;
}

// Runs the test split of `test_manifest` through the encoder and the index.
// Per-query time includes feature extraction.
inline EvalReport evaluate(const FeatureIndex& index, const CaeModel<float>& model,
                           const DatasetManifest& test_manifest, int k, Scenario scenario,
                           PredictionRule rule = PredictionRule::majority) {
  require_binding(index, model);
  const auto records = test_manifest.select({Split::test});
  if (records.empty()) throw EvalError("manifest has no test-split images");
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.id);
  guard_leakage(index, ids);
  EvalReport report;
  report.scenario = scenario;
  report.k = static_cast<std::size_t>(std::max(k, 0));
  report.rule = rule;
  report.confusion.positive = positive_class_name(index);
  for (const auto& r : records) {
    const auto img = load_model_input(model, test_manifest, r);
    const auto res = search_image(index, model, img, k, scenario, r.magnification, r.id);
    report.records.push_back(detail::score_query(report, res, r.label));
  }
  detail::finish_report(report);
  return report;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string cm_line(const std::string& name, const ConfusionMatrix& cm) {
  const auto m = metrics(cm);
  return name + " tp=" + std::to_string(cm.tp) + " fp=" + std::to_string(cm.fp) +
         " fn=" + std::to_string(cm.fn) + " tn=" + std::to_string(cm.tn) +
         " accuracy=" + fmt(m.accuracy) + " precision=" + fmt(m.precision) + " f1=" + fmt(m.f1) +
         "\n";
}

}  // namespace detail

// Header line, one line per metric, then one line per query:
//   query-id, true, predicted, nearest-distance, seconds
inline std::string format_report(const EvalReport& r) {
  std::string out = std::string("# eval scenario=") + to_string(r.scenario) +
                    " k=" + std::to_string(r.k) + " rule=" + to_string(r.rule) +
                    " positive=" + r.confusion.positive +
                    " queries=" + std::to_string(r.records.size()) + "\n";
  const auto& m = r.scores;
  out += "tp " + std::to_string(r.confusion.tp) + "\n";
  out += "fp " + std::to_string(r.confusion.fp) + "\n";
  out += "fn " + std::to_string(r.confusion.fn) + "\n";
  out += "tn " + std::to_string(r.confusion.tn) + "\n";
  out += "accuracy " + detail::fmt(m.accuracy) + "\n";
  out += "precision " + detail::fmt(m.precision) + (m.precision_undefined ? " undefined" : "") + "\n";
  out += "recall " + detail::fmt(m.recall) + (m.recall_undefined ? " undefined" : "") + "\n";
  out += "f1 " + detail::fmt(m.f1) + (m.f1_undefined ? " undefined" : "") + "\n";
  out += "mean_search_seconds " + detail::fmt(r.timing.mean) + "\n";
  out += "p95_search_seconds " + detail::fmt(r.timing.p95) + "\n";
  if (r.scenario == Scenario::sen2) {
    out += detail::cm_line("pooled", r.confusion);
    for (const auto& [mag, cm] : r.group_confusion) {
      out += detail::cm_line(std::string("group ") + to_string(mag), cm);
    }
  }
  for (const auto& q : r.records) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f, %.6f", q.nearest_distance, q.seconds);
    out += q.query_id + ", " + to_string(q.truth) + ", " + to_string(q.predicted) + ", " + buf + "\n";
  }
  return out;
}

}  // namespace fedcbmir
