#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcbmir/cae/config.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/numerics/tape.hpp"
#include "fedcbmir/random.hpp"
#include "fedcbmir/weights.hpp"

namespace fedcbmir {

// Bottleneck code for one image.
struct FeatureVector {
  std::vector<float> values;
  std::string source_id;
};

inline Layout cae_layout(const CaeConfig& cfg) {
  cfg.validate();
  Layout layout;
  const std::size_t k = CaeConfig::kKernel;
  std::size_t prev = cfg.channels;
  for (std::size_t i = 0; i < cfg.stages(); ++i) {
    const std::size_t f = cfg.encoder_filters[i];
    layout.add("enc" + std::to_string(i) + ".weight", {f, prev, k, k});
    layout.add("enc" + std::to_string(i) + ".bias", {f});
    prev = f;
  }
  const auto& r = cfg.residual_filters;
  layout.add("res0.weight", {r[0], prev, 1, 1});
  layout.add("res0.bias", {r[0]});
  layout.add("res1.weight", {r[1], r[0], k, k});
  layout.add("res1.bias", {r[1]});
  layout.add("res2.weight", {r[2], r[1], 1, 1});
  layout.add("res2.bias", {r[2]});
  layout.add("bottleneck.weight", {cfg.bottleneck_dim, cfg.grid_size()});
  layout.add("bottleneck.bias", {cfg.bottleneck_dim});
  layout.add("expand.weight", {cfg.grid_size(), cfg.bottleneck_dim});
  layout.add("expand.bias", {cfg.grid_size()});
  const std::size_t kd = CaeConfig::kDecoderKernel;
  for (std::size_t i = 0; i < cfg.stages(); ++i) {
    const std::size_t f = cfg.decoder_filters[i];
    layout.add("dec" + std::to_string(i) + ".weight", {prev, f, kd, kd});
    layout.add("dec" + std::to_string(i) + ".bias", {f});
    prev = f;
  }
  return layout;
}

template <class T>
class CaeModel {
 public:
  // Deterministic He-uniform initialization from cfg.seed; biases start at 0.
  static CaeModel build(const CaeConfig& cfg) {
    CaeModel m(cfg, cae_layout(cfg));
    Rng rng(cfg.seed);
    for (const auto& layer : m.layout_.layers()) {
      if (layer.shape.size() == 1) continue;
      double fan_in = 0;
      if (layer.name.starts_with("dec")) {
        // Each transposed-conv output sees about in*k*k/stride^2 inputs.
        fan_in = static_cast<double>(layer.shape[0] * layer.shape[2] * layer.shape[3]) / 4.0;
      } else {
        fan_in = static_cast<double>(element_count(layer.shape) / layer.shape[0]);
      }
      const double bound = std::sqrt(6.0 / fan_in);
      const std::size_t n = element_count(layer.shape);
      for (std::size_t i = 0; i < n; ++i) {
        m.params_[layer.offset + i] = static_cast<T>(uniform(rng, -bound, bound));
      }
    }
    return m;
  }

  // Model of the given shape with every parameter set to zero.
  static CaeModel zeros(const CaeConfig& cfg) { return CaeModel(cfg, cae_layout(cfg)); }

  const CaeConfig& config() const { return config_; }
  const Layout& layout() const { return layout_; }
  LayoutId layout_id() const { return layout_.id(); }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<T> params() { return params_; }
  std::span<const T> params() const { return params_; }

  Tensor<T> param(const std::string& name) const {
    const auto& l = layout_.layer(name);
    auto first = params_.begin() + static_cast<std::ptrdiff_t>(l.offset);
    return Tensor<T>(l.shape,
                     std::vector<T>(first, first + static_cast<std::ptrdiff_t>(element_count(l.shape))));
  }

  void set_param(const std::string& name, const Tensor<T>& value) {
    const auto& l = layout_.layer(name);
    if (value.shape() != l.shape) {
      throw DimensionError("set_param " + name + ": " + to_string(value.shape()) + " vs " +
                           to_string(l.shape));
    }
    std::copy(value.data().begin(), value.data().end(),
              params_.begin() + static_cast<std::ptrdiff_t>(l.offset));
  }

  ModelWeights weights() const { return weights_as<float>(); }

  template <class U>
  BasicWeights<U> weights_as() const {
    return BasicWeights<U>{layout_id(), std::vector<U>(params_.begin(), params_.end())};
  }

  template <class U>
  void load(const BasicWeights<U>& w) {
    if (w.layout_id != layout_id()) {
      throw DecodeError(DecodeFault::layout_mismatch, "weights do not belong to this model");
    }
    if (w.values.size() != params_.size()) {
      throw DimensionError("weights carry " + std::to_string(w.values.size()) +
                           " values, model has " + std::to_string(params_.size()));
    }
    std::transform(w.values.begin(), w.values.end(), params_.begin(),
                   [](U v) { return static_cast<T>(v); });
  }

  template <class U>
  static CaeModel from_weights(const CaeConfig& cfg, const BasicWeights<U>& w) {
    CaeModel m = zeros(cfg);
    m.load(w);
    return m;
  }

  template <class U>
  CaeModel<U> cast() const {
    CaeModel<U> out = CaeModel<U>::zeros(config_);
    std::transform(params_.begin(), params_.end(), out.params().begin(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

 private:
  CaeModel(CaeConfig cfg, Layout layout)
      : config_(std::move(cfg)), layout_(std::move(layout)), params_(layout_.total(), T{0}) {}

  CaeConfig config_;
  Layout layout_;
  std::vector<T> params_;
};

// A recorded forward pass. `params[i]` is the tape node of layout layer i.
template <class T>
struct CaeGraph {
  Tape<T> tape;
  typename Tape<T>::Id input = 0;
  typename Tape<T>::Id residual_in = 0;
  typename Tape<T>::Id residual_out = 0;
  typename Tape<T>::Id features = 0;
  typename Tape<T>::Id output = 0;
  std::vector<typename Tape<T>::Id> params;
  bool decoded = false;
};

template <class T>
void check_image(const CaeConfig& cfg, const Tensor<T>& image) {
  const Shape want{cfg.channels, cfg.height, cfg.width};
  if (image.shape() != want) {
    throw DimensionError("cae: image " + to_string(image.shape()) + " does not match model input " +
                         to_string(want));
  }
}

// encoder -> residual block (with skip) -> dense bottleneck -> dense back to
// the grid -> decoder. With decode=false the graph stops at the bottleneck.
template <class T>
CaeGraph<T> record_forward(const CaeModel<T>& model, const Tensor<T>& image, bool trainable,
                           bool decode = true) {
  const auto& cfg = model.config();
  check_image(cfg, image);
  CaeGraph<T> g;
  auto& t = g.tape;
  for (const auto& layer : model.layout().layers()) {
    g.params.push_back(t.leaf(model.param(layer.name), trainable));
  }
  std::size_t p = 0;
  auto next = [&] { return g.params[p++]; };

  g.input = t.leaf(image);
  auto x = g.input;
  for (std::size_t i = 0; i < cfg.stages(); ++i) {
    auto w = next();
    auto b = next();
    x = t.relu(t.conv2d(x, w, b, 2, 1));
  }

  g.residual_in = x;
  {
    auto w0 = next(), b0 = next();
    auto w1 = next(), b1 = next();
    auto w2 = next(), b2 = next();
    auto h = t.relu(t.conv2d(x, w0, b0, 1, 0));
    h = t.relu(t.conv2d(h, w1, b1, 1, 1));
    h = t.conv2d(h, w2, b2, 1, 0);
    x = t.relu(t.add(x, h));
  }
  g.residual_out = x;

  {
    auto w = next(), b = next();
    g.features = t.relu(t.dense(x, w, b));
  }
  if (!decode) return g;

  {
    auto w = next(), b = next();
    x = t.relu(t.dense(g.features, w, b));
    x = t.reshape(x, {cfg.grid_channels(), cfg.grid_height(), cfg.grid_width()});
  }
  for (std::size_t i = 0; i < cfg.stages(); ++i) {
    auto w = next();
    auto b = next();
    x = t.transpose_conv2d(x, w, b, 2, 1);
    x = (i + 1 == cfg.stages()) ? t.sigmoid(x) : t.relu(x);
  }
  g.output = x;
  g.decoded = true;
  return g;
}

template <class T>
Tensor<T> forward(const CaeModel<T>& model, const Tensor<T>& image) {
  auto g = record_forward(model, image, false, true);
  return g.tape.value(g.output);
}

template <class T>
std::vector<T> encode(const CaeModel<T>& model, const Tensor<T>& image) {
  auto g = record_forward(model, image, false, false);
  return g.tape.value(g.features).storage();
}

inline FeatureVector extract_features(const CaeModel<float>& model, const Tensor<float>& image,
                                      std::string source_id) {
  return FeatureVector{encode(model, image), std::move(source_id)};
}

template <class T>
struct LossGradient {
  double loss = 0.0;
  std::vector<T> gradient;  // flat, in layout order
};

// Reconstruction MSE of one image and its gradient w.r.t. every parameter.
template <class T>
LossGradient<T> loss_and_gradient(const CaeModel<T>& model, const Tensor<T>& image) {
  auto g = record_forward(model, image, true, true);
  const auto loss = g.tape.mse(g.output, g.input);
  const auto grads = g.tape.backward(loss);
  LossGradient<T> out{static_cast<double>(g.tape.value(loss)[0]),
                      std::vector<T>(model.parameter_count(), T{0})};
  const auto& layers = model.layout().layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& gi = grads.of(g.params[i]);
    if (!gi) continue;
    std::copy(gi->data().begin(), gi->data().end(),
              out.gradient.begin() + static_cast<std::ptrdiff_t>(layers[i].offset));
  }
  return out;
}

// Mean loss and mean gradient over the selected images, accumulated in the
// given order.
template <class T>
LossGradient<T> batch_loss_and_gradient(const CaeModel<T>& model,
                                        std::span<const Tensor<T>> images,
                                        std::span<const std::size_t> order) {
  if (order.empty()) throw ContractError("batch_loss_and_gradient: empty batch");
  LossGradient<T> acc{0.0, std::vector<T>(model.parameter_count(), T{0})};
  for (auto idx : order) {
    auto lg = loss_and_gradient(model, images[idx]);
    acc.loss += lg.loss;
    for (std::size_t i = 0; i < acc.gradient.size(); ++i) acc.gradient[i] += lg.gradient[i];
  }
  const T inv = T{1} / static_cast<T>(order.size());
  for (auto& v : acc.gradient) v *= inv;
  acc.loss /= static_cast<double>(order.size());
  return acc;
}

}  // namespace fedcbmir
