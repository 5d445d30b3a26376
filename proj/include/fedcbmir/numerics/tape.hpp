#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "fedcbmir/errors.hpp"
#include "fedcbmir/numerics/ops.hpp"
#include "fedcbmir/numerics/tensor.hpp"

namespace fedcbmir {

template <class T>
class Tape;

// Reverse-mode result: one gradient per trainable leaf, nothing for frozen
// tensors or intermediates.
template <class T>
class Gradients {
 public:
  explicit Gradients(std::vector<std::optional<Tensor<T>>> grads) : grads_(std::move(grads)) {}

  const std::optional<Tensor<T>>& of(std::size_t node) const { return grads_.at(node); }

 private:
  std::vector<std::optional<Tensor<T>>> grads_;
};

// Records a forward computation so it can be differentiated. Nodes are
// append-only and identified by their position.
template <class T>
class Tape {
 public:
  using Id = std::size_t;

  Id leaf(Tensor<T> value, bool trainable = false) {
    return push(std::move(value), trainable, {}, nullptr);
  }

  const Tensor<T>& value(Id id) const { return nodes_.at(id).value; }
  bool trainable(Id id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  Id conv2d(Id x, Id k, Id b, std::size_t stride, std::size_t pad) {
    auto out = fedcbmir::conv2d(value(x), value(k), value(b), stride, pad);
    return push(std::move(out), false, {x, k, b},
                [stride, pad](const Tape& t, const Node& n, const Tensor<T>& g, Accum& acc) {
                  auto gr = conv2d_backward(t.value(n.inputs[0]), t.value(n.inputs[1]),
                                            t.value(n.inputs[2]), stride, pad, g);
                  acc(n.inputs[0], std::move(gr.input));
                  acc(n.inputs[1], std::move(gr.kernel));
                  acc(n.inputs[2], std::move(gr.bias));
                });
  }

  Id transpose_conv2d(Id x, Id k, Id b, std::size_t stride, std::size_t pad) {
    auto out = fedcbmir::transpose_conv2d(value(x), value(k), value(b), stride, pad);
    return push(std::move(out), false, {x, k, b},
                [stride, pad](const Tape& t, const Node& n, const Tensor<T>& g, Accum& acc) {
                  auto gr = transpose_conv2d_backward(t.value(n.inputs[0]), t.value(n.inputs[1]),
                                                      t.value(n.inputs[2]), stride, pad, g);
                  acc(n.inputs[0], std::move(gr.input));
                  acc(n.inputs[1], std::move(gr.kernel));
                  acc(n.inputs[2], std::move(gr.bias));
                });
  }

  Id dense(Id x, Id w, Id b) {
    auto out = fedcbmir::dense(value(x), value(w), value(b));
    return push(std::move(out), false, {x, w, b},
                [](const Tape& t, const Node& n, const Tensor<T>& g, Accum& acc) {
                  auto gr = dense_backward(t.value(n.inputs[0]), t.value(n.inputs[1]), g);
                  acc(n.inputs[0], std::move(gr.input));
                  acc(n.inputs[1], std::move(gr.weight));
                  acc(n.inputs[2], std::move(gr.bias));
                });
  }

  Id relu(Id x) {
    return push(fedcbmir::relu(value(x)), false, {x},
                [](const Tape&, const Node& n, const Tensor<T>& g, Accum& acc) {
                  Tensor<T> gx = g;
                  for (std::size_t i = 0; i < gx.size(); ++i) {
                    if (!(n.value[i] > T{0})) gx[i] = T{0};
                  }
                  acc(n.inputs[0], std::move(gx));
                });
  }

  Id sigmoid(Id x) {
    return push(fedcbmir::sigmoid(value(x)), false, {x},
                [](const Tape&, const Node& n, const Tensor<T>& g, Accum& acc) {
                  Tensor<T> gx = g;
                  for (std::size_t i = 0; i < gx.size(); ++i) {
                    const T s = n.value[i];
                    gx[i] *= s * (T{1} - s);
                  }
                  acc(n.inputs[0], std::move(gx));
                });
  }

  Id add(Id a, Id b) {
    return push(fedcbmir::add(value(a), value(b)), false, {a, b},
                [](const Tape&, const Node& n, const Tensor<T>& g, Accum& acc) {
                  acc(n.inputs[0], Tensor<T>(g));
                  acc(n.inputs[1], Tensor<T>(g));
                });
  }

  Id reshape(Id x, Shape shape) {
    return push(value(x).reshaped(std::move(shape)), false, {x},
                [](const Tape& t, const Node& n, const Tensor<T>& g, Accum& acc) {
                  acc(n.inputs[0], g.reshaped(t.value(n.inputs[0]).shape()));
                });
  }

  // Scalar [1] node holding mean((a - b)^2).
  Id mse(Id a, Id b) {
    Tensor<T> out({1}, std::vector<T>{fedcbmir::mse(value(a), value(b))});
    return push(std::move(out), false, {a, b},
                [](const Tape& t, const Node& n, const Tensor<T>& g, Accum& acc) {
                  const auto& va = t.value(n.inputs[0]);
                  const auto& vb = t.value(n.inputs[1]);
                  const T scale = T{2} * g[0] / static_cast<T>(va.size());
                  Tensor<T> ga(va.shape());
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = scale * (va[i] - vb[i]);
                  Tensor<T> gb = ga;
                  for (auto& v : gb.data()) v = -v;
                  acc(n.inputs[0], std::move(ga));
                  acc(n.inputs[1], std::move(gb));
                });
  }

  // Gradient of a scalar root with respect to every trainable leaf.
  Gradients<T> backward(Id root) const {
    if (value(root).size() != 1) {
      throw ContractError("backward: root node has " + std::to_string(value(root).size()) +
                          " elements, expected a scalar");
    }
    std::vector<std::optional<Tensor<T>>> grads(nodes_.size());
    grads[root] = Tensor<T>::filled(value(root).shape(), T{1});
    Accum acc{*this, grads};
    for (std::size_t i = root + 1; i-- > 0;) {
      const Node& n = nodes_[i];
      if (!n.requires_grad || !grads[i] || !n.backward) continue;
      n.backward(*this, n, *grads[i], acc);
      grads[i].reset();  // intermediates are not reported
    }
    // Only leaves keep their gradient.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].backward || !nodes_[i].requires_grad) grads[i].reset();
    }
    return Gradients<T>(std::move(grads));
  }

 private:
  struct Node;

  struct Accum {
    const Tape& tape;
    std::vector<std::optional<Tensor<T>>>& grads;

    void operator()(Id id, Tensor<T> g) {
      if (!tape.nodes_[id].requires_grad) return;
      auto& slot = grads[id];
      if (!slot) {
        slot = std::move(g);
      } else {
        for (std::size_t i = 0; i < slot->size(); ++i) (*slot)[i] += g[i];
      }
    }
  };

  using BackwardFn = std::function<void(const Tape&, const Node&, const Tensor<T>&, Accum&)>;

  struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    std::vector<Id> inputs;
    BackwardFn backward;
  };

  Id push(Tensor<T> value, bool trainable, std::vector<Id> inputs, BackwardFn fn) {
    bool rg = trainable;
    for (Id in : inputs) rg = rg || nodes_.at(in).requires_grad;
    nodes_.push_back(Node{std::move(value), rg, std::move(inputs), std::move(fn)});
    return nodes_.size() - 1;
  }

  std::vector<Node> nodes_;
};

}  // namespace fedcbmir
