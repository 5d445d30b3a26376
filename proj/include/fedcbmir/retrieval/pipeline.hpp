#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include "fedcbmir/cae/model.hpp"
#include "fedcbmir/data/image.hpp"
#include "fedcbmir/data/manifest.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/retrieval/index.hpp"
#include "fedcbmir/retrieval/search.hpp"

namespace fedcbmir {

// Loads one manifest image and checks it fits the model input.
inline Tensor<float> load_model_input(const CaeModel<float>& model, const DatasetManifest& m,
                                      const ImageRecord& r) {
  const auto path = m.resolve(r);
  auto img = load_image<float>(path);
  try {
    check_image(model.config(), img);
  } catch (const DimensionError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  return img;
}

inline std::vector<Tensor<float>> load_images(const CaeModel<float>& model, const DatasetManifest& m,
                                              const std::vector<ImageRecord>& records) {
  std::vector<Tensor<float>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(load_model_input(model, m, r));
  return out;
}

// One entry per selected record, in manifest order.
inline FeatureIndex build_index(const CaeModel<float>& model, const DatasetManifest& manifest,
                                std::initializer_list<Split> splits = {Split::train,
                                                                       Split::validation}) {
  for (auto s : splits) {
    if (s == Split::test) throw IndexError("the index may not contain test images");
  }
  if (model.config().bottleneck_dim != kFeatureDim) {
    throw IndexError("index vectors are " + std::to_string(kFeatureDim) +
                     "-dimensional; model bottleneck is " +
                     std::to_string(model.config().bottleneck_dim));
  }
  const auto records = manifest.select(splits);
  if (records.empty()) throw IndexError("no images to index");
  std::vector<IndexEntry> entries;
  entries.reserve(records.size());
  for (const auto& r : records) {
    const auto img = load_model_input(model, manifest, r);
    entries.push_back({r.id, encode(model, img), r.label, r.magnification, r.center, r.split});
  }
  return FeatureIndex(model.layout_id(), std::move(entries));
}

inline void require_binding(const FeatureIndex& index, const CaeModel<float>& model) {
  if (index.layout_id() != model.layout_id()) {
    throw IndexError("index was built by a different model layout");
  }
}

// Encodes the query image, then searches. Elapsed time covers both.
inline RetrievalResult search_image(const FeatureIndex& index, const CaeModel<float>& model,
                                    const Tensor<float>& image, int k, Scenario scenario,
                                    Magnification query_magnification,
                                    const std::string& query_id = {}) {
  require_binding(index, model);
  if (k <= 0) throw ContractError("search: K must be positive, got " + std::to_string(k));
  const auto start = std::chrono::steady_clock::now();
  const auto features = encode(model, image);
  auto r = search(index, features, k, scenario, query_magnification, query_id);
  r.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace fedcbmir
