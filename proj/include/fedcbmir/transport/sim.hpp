#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "fedcbmir/errors.hpp"
#include "fedcbmir/fed/federation.hpp"
#include "fedcbmir/fed/serialize.hpp"
#include "fedcbmir/transport/message.hpp"

namespace fedcbmir {

enum class FaultKind { drop, delay };

// Interferes with one client's LOCAL_UPDATE for one round. A dropped update
// never arrives; a delayed one arrives one collection late, carrying its
// original (now stale) round.
struct Fault {
  std::string client_id;
  std::uint64_t round = 0;
  FaultKind kind = FaultKind::drop;
};

using FaultPlan = std::vector<Fault>;

template <class T>
using ClientLogic = std::function<BasicClientUpdate<T>(std::uint64_t round, const BasicWeights<T>&)>;

// In-process transport. Clients run synchronously inside collect(), in roster
// order. Collection never times out.
template <class T>
class SimulatedNetwork final : public FederationLink<T> {
 public:
  SimulatedNetwork(std::map<std::string, ClientLogic<T>> clients, FaultPlan faults = {})
      : clients_(std::move(clients)), faults_(std::move(faults)) {}

  void await_joins(const std::vector<std::string>& roster) override {
    for (const auto& c : roster) {
      if (!clients_.count(c)) throw ProtocolError("roster client " + c + " never joined");
      inbox_.push_back(encode_message({MessageType::join, 0, c, {}}));
    }
    for (auto& frame : inbox_) {
      if (decode_message(frame).type != MessageType::join) throw ProtocolError("expected JOIN");
    }
    inbox_.clear();
  }

  void send_global(const std::string& client, std::uint64_t round,
                   const BasicWeights<T>& global) override {
    outbox_[client].push_back({static_cast<std::uint32_t>(round), carry(global)});
  }

  std::vector<BasicClientUpdate<T>> collect(std::uint64_t,
                                            const std::vector<std::string>& expected) override {
    std::vector<BasicClientUpdate<T>> arrived = std::move(late_);
    late_.clear();
    for (const auto& c : expected) {
      auto& q = outbox_[c];
      while (!q.empty()) {
        auto [round, global] = std::move(q.front());
        q.pop_front();
        auto u = carry(clients_.at(c)(round, global));
        const auto* f = fault_for(c, round);
        if (!f) {
          arrived.push_back(std::move(u));
        } else if (f->kind == FaultKind::delay) {
          late_.push_back(std::move(u));
        }
      }
    }
    return arrived;
  }

  void send_control(const std::string& client, MessageType type, std::uint64_t round) override {
    control_.push_back(
        decode_message(encode_message({type, static_cast<std::uint32_t>(round), client, {}})));
  }

  // ROUND_DONE / ABORT messages delivered so far, in order.
  const std::vector<Message>& control_messages() const { return control_; }

 private:
  // 32-bit weights travel through the real frame encoding. Wider types have
  // no wire form and are handed over in memory.
  static BasicWeights<T> carry(const BasicWeights<T>& w) {
    if constexpr (std::is_same_v<T, float>) {
      auto frame = encode_message({MessageType::global_weights, 0, "sim", serialize_weights(w)});
      return deserialize_weights(decode_message(frame).body, w.layout_id);
    } else {
      return w;
    }
  }

  static BasicClientUpdate<T> carry(BasicClientUpdate<T> u) {
    if constexpr (std::is_same_v<T, float>) {
      auto frame = encode_message({MessageType::local_update, static_cast<std::uint32_t>(u.round),
                                   u.client_id,
                                   encode_update_body({u.n_k, u.mean_loss, u.weights})});
      const auto msg = decode_message(frame);
      auto body = decode_update_body(msg.body);
      u.client_id = msg.client_id;
      u.round = msg.round;
      u.n_k = body.n_k;
      u.mean_loss = body.mean_loss;
      u.weights = std::move(body.weights);
    }
    return u;
  }

  const Fault* fault_for(const std::string& c, std::uint64_t round) const {
    for (const auto& f : faults_) {
      if (f.client_id == c && f.round == round) return &f;
    }
    return nullptr;
  }

  std::map<std::string, ClientLogic<T>> clients_;
  FaultPlan faults_;
  std::map<std::string, std::deque<std::pair<std::uint32_t, BasicWeights<T>>>> outbox_;
  std::vector<Bytes> inbox_;
  std::vector<BasicClientUpdate<T>> late_;
  std::vector<Message> control_;
};

// Convenience: the whole federation over the simulated network.
template <class T>
FederationResult<T> simulate_federation(const RoundConfig& cfg, BasicWeights<T> initial,
                                        std::map<std::string, ClientLogic<T>> clients,
                                        FaultPlan faults = {}, Transcript* transcript = nullptr,
                                        const std::function<void(const RoundRecord&)>& on_round = {}) {
  SimulatedNetwork<T> net(std::move(clients), std::move(faults));
  return run_federation<T>(cfg, std::move(initial), net, transcript, on_round);
}

}  // namespace fedcbmir
