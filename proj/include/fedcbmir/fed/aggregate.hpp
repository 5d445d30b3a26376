#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedcbmir/errors.hpp"
#include "fedcbmir/weights.hpp"

namespace fedcbmir {

template <class T>
struct BasicClientUpdate {
  std::string client_id;
  std::uint64_t round = 0;
  std::uint64_t n_k = 0;  // local training-set size
  BasicWeights<T> weights;
  double mean_loss = 0.0;  // last local epoch, for the round log
};

using ClientUpdate = BasicClientUpdate<float>;

namespace detail {

// Validates a round's updates and returns them ordered by client id.
template <class T>
std::vector<const BasicClientUpdate<T>*> ordered_updates(
    std::span<const BasicClientUpdate<T>> updates) {
  if (updates.empty()) throw ProtocolError("aggregate: no client updates");
  std::vector<const BasicClientUpdate<T>*> order;
  const auto& first = updates.front();
  for (const auto& u : updates) {
    if (u.round != first.round) {
      throw ProtocolError("aggregate: mixed rounds " + std::to_string(first.round) + " and " +
                          std::to_string(u.round));
    }
    if (u.weights.layout_id != first.weights.layout_id ||
        u.weights.values.size() != first.weights.values.size()) {
      throw ProtocolError("aggregate: client " + u.client_id + " sent a different layout");
    }
    if (u.n_k == 0) throw ProtocolError("aggregate: client " + u.client_id + " reports n_k = 0");
    order.push_back(&u);
  }
  std::sort(order.begin(), order.end(),
            [](auto* a, auto* b) { return a->client_id < b->client_id; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (order[i]->client_id == order[i - 1]->client_id) {
      throw ProtocolError("aggregate: duplicate update from " + order[i]->client_id);
    }
  }
  return order;
}

// sum_k n_k * w_k / n in 64-bit, in client-id order.
template <class T>
std::vector<double> weighted_mean(const std::vector<const BasicClientUpdate<T>*>& order) {
  double n = 0;
  for (auto* u : order) n += static_cast<double>(u->n_k);
  std::vector<double> acc(order.front()->weights.values.size(), 0.0);
  for (auto* u : order) {
    const double nk = static_cast<double>(u->n_k);
    const auto& v = u->weights.values;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += nk * static_cast<double>(v[i]);
  }
  for (auto& a : acc) a /= n;
  return acc;
}

}  // namespace detail

// omega_{r+1} = sum_k (n_k / n) * omega^k_{r+1}
template <class T>
BasicWeights<T> fedavg_aggregate(std::span<const BasicClientUpdate<T>> updates) {
  const auto order = detail::ordered_updates(updates);
  const auto mean = detail::weighted_mean(order);
  BasicWeights<T> out{order.front()->weights.layout_id, std::vector<T>(mean.size())};
  for (std::size_t i = 0; i < mean.size(); ++i) out.values[i] = static_cast<T>(mean[i]);
  return out;
}

struct FedAdagradParams {
  double server_lr = 0.1;
  double tau = 1e-3;
};

// Server-side state of adaptive aggregation: the squared pseudo-gradient
// accumulator v (starts at 0).
struct FedAdagradState {
  FedAdagradParams params;
  std::vector<double> v;
};

// delta = sum_k (n_k/n) (omega^k - omega_r);  v += delta^2;
// omega_{r+1} = omega_r + eta_s * delta / (sqrt(v) + tau)
template <class T>
BasicWeights<T> fedadagrad_aggregate(FedAdagradState& state, const BasicWeights<T>& global,
                                     std::span<const BasicClientUpdate<T>> updates) {
  const auto order = detail::ordered_updates(updates);
  if (order.front()->weights.layout_id != global.layout_id ||
      order.front()->weights.values.size() != global.values.size()) {
    throw ProtocolError("fedadagrad: updates do not match the global layout");
  }
  const auto mean = detail::weighted_mean(order);
  if (state.v.empty()) state.v.assign(global.values.size(), 0.0);
  if (state.v.size() != global.values.size()) {
    throw ProtocolError("fedadagrad: accumulator size does not match the model");
  }
  BasicWeights<T> out{global.layout_id, std::vector<T>(global.values.size())};
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double w = static_cast<double>(global.values[i]);
    const double delta = mean[i] - w;
    state.v[i] += delta * delta;
    const double step =
        delta == 0.0 ? 0.0 : state.params.server_lr * delta / (std::sqrt(state.v[i]) + state.params.tau);
    out.values[i] = static_cast<T>(w + step);
  }
  return out;
}

}  // namespace fedcbmir
