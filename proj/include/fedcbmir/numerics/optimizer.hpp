#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedcbmir/errors.hpp"
#include "fedcbmir/weights.hpp"

namespace fedcbmir {

enum class OptimizerKind { sgd, adam };

inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::sgd ? "sgd" : "adam";
}

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  AdamParams adam{};
  // Adam moments; empty for SGD and until the first Adam step.
  std::vector<T> m, v;
  std::uint64_t step = 0;

  static OptimizerState sgd(double lr) { return {OptimizerKind::sgd, lr}; }
  static OptimizerState adam_with(double lr) { return {OptimizerKind::adam, lr}; }
};

// Applies one update in place. A non-finite gradient aborts before any
// parameter is touched; `layout`, when given, names the offending layer.
template <class T>
void optimizer_step(OptimizerState<T>& state, std::span<T> weights, std::span<const T> grad,
                    const Layout* layout = nullptr) {
  if (weights.size() != grad.size()) {
    throw DimensionError("optimizer_step: " + std::to_string(weights.size()) +
                         " weights vs " + std::to_string(grad.size()) + " gradient values");
  }
  if (!(state.learning_rate > 0.0)) {
    throw ConfigError("optimizer_step: learning rate must be positive");
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(static_cast<double>(grad[i]))) {
      throw TrainingError("non-finite gradient in layer " +
                          (layout ? layout->layer_of(i) : std::string("#") + std::to_string(i)));
    }
  }
  ++state.step;
  const T lr = static_cast<T>(state.learning_rate);
  if (state.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < weights.size(); ++i) weights[i] -= lr * grad[i];
    return;
  }
  if (state.m.size() != weights.size()) {
    state.m.assign(weights.size(), T{0});
    state.v.assign(weights.size(), T{0});
  }
  const T b1 = static_cast<T>(state.adam.beta1);
  const T b2 = static_cast<T>(state.adam.beta2);
  const T eps = static_cast<T>(state.adam.epsilon);
  const T c1 = static_cast<T>(1.0 - std::pow(state.adam.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(state.adam.beta2, static_cast<double>(state.step)));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const T g = grad[i];
    state.m[i] = b1 * state.m[i] + (T{1} - b1) * g;
    state.v[i] = b2 * state.v[i] + (T{1} - b2) * g * g;
    const T mhat = state.m[i] / c1;
    const T vhat = state.v[i] / c2;
    weights[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace fedcbmir
