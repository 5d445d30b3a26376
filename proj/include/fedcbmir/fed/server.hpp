#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedcbmir/errors.hpp"
#include "fedcbmir/fed/aggregate.hpp"
#include "fedcbmir/numerics/optimizer.hpp"

namespace fedcbmir {

enum class Strategy { fedavg, fedadagrad };

inline const char* to_string(Strategy s) { return s == Strategy::fedavg ? "fedavg" : "fedadagrad"; }

inline Strategy parse_strategy(const std::string& s) {
  if (s == "fedavg") return Strategy::fedavg;
  if (s == "fedadagrad") return Strategy::fedadagrad;
  throw ConfigError("unknown strategy '" + s + "'");
}

struct RosterEntry {
  std::string client_id;
  std::uint64_t expected_n = 0;  // 0 = not checked
};

struct LocalTrainingSpec {
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
};

struct RoundConfig {
  std::size_t rounds = 1;
  LocalTrainingSpec local;
  Strategy strategy = Strategy::fedavg;
  std::optional<FedAdagradParams> adagrad;  // set iff strategy == fedadagrad
  std::vector<RosterEntry> roster;
  std::uint64_t seed = 0;

  std::vector<std::string> client_ids() const {
    std::vector<std::string> ids;
    for (const auto& r : roster) ids.push_back(r.client_id);
    return ids;
  }

  void validate() const {
    if (roster.empty()) throw ConfigError("federation roster is empty");
    std::set<std::string> seen;
    for (const auto& r : roster) {
      if (r.client_id.empty()) throw ConfigError("roster entry with empty client id");
      if (!seen.insert(r.client_id).second) {
        throw ConfigError("duplicate roster client " + r.client_id);
      }
    }
    if ((strategy == Strategy::fedadagrad) != adagrad.has_value()) {
      throw ConfigError("FedAdagrad parameters must be given exactly when the strategy is fedadagrad");
    }
    if (local.batch_size == 0) throw ConfigError("local batch size must be positive");
    if (!(local.learning_rate > 0)) throw ConfigError("local learning rate must be positive");
  }
};

struct RoundSummary {
  std::uint64_t round = 0;
  double mean_client_loss = 0.0;
};

// Round state machine: collects one update per roster client for the current
// round, then aggregates exactly once and advances.
template <class T>
class FederationServer {
 public:
  FederationServer(RoundConfig cfg, BasicWeights<T> initial)
      : cfg_(std::move(cfg)), global_(std::move(initial)) {
    cfg_.validate();
    if (cfg_.adagrad) adagrad_ = FedAdagradState{*cfg_.adagrad, {}};
  }

  std::uint64_t round() const {
    std::lock_guard lock(mu_);
    return round_;
  }
  bool finished() const { return round() >= cfg_.rounds; }
  const RoundConfig& config() const { return cfg_; }

  BasicWeights<T> global() const {
    std::lock_guard lock(mu_);
    return global_;
  }

  // Rejects (throws ProtocolError) anything that is not a fresh update for the
  // current round from a roster client. Nothing rejected is ever merged.
  void submit(BasicClientUpdate<T> u) {
    std::lock_guard lock(mu_);
    const auto* entry = find(u.client_id);
    if (!entry) throw ProtocolError("update from unknown client " + u.client_id);
    if (u.round != round_) {
      throw ProtocolError("update from " + u.client_id + " carries round " +
                          std::to_string(u.round) + ", server is at round " +
                          std::to_string(round_));
    }
    if (u.weights.layout_id != global_.layout_id ||
        u.weights.values.size() != global_.values.size()) {
      throw ProtocolError("update from " + u.client_id + " has a different layout");
    }
    if (entry->expected_n != 0 && entry->expected_n != u.n_k) {
      throw ProtocolError("update from " + u.client_id + " reports n_k=" +
                          std::to_string(u.n_k) + ", roster expects " +
                          std::to_string(entry->expected_n));
    }
    if (!buffer_.emplace(u.client_id, std::move(u)).second) {
      throw ProtocolError("duplicate update for round " + std::to_string(round_));
    }
  }

  std::vector<std::string> missing() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& r : cfg_.roster) {
      if (!buffer_.count(r.client_id)) out.push_back(r.client_id);
    }
    return out;
  }

  bool ready() const { return missing().empty(); }

  // Fires only with full participation.
  RoundSummary aggregate() {
    std::lock_guard lock(mu_);
    if (buffer_.size() != cfg_.roster.size()) {
      throw ProtocolError("aggregate called with " + std::to_string(buffer_.size()) + " of " +
                          std::to_string(cfg_.roster.size()) + " updates");
    }
    std::vector<BasicClientUpdate<T>> updates;
    double loss = 0.0;
    for (auto& [id, u] : buffer_) {
      loss += u.mean_loss;
      updates.push_back(std::move(u));
    }
    buffer_.clear();
    if (cfg_.strategy == Strategy::fedavg) {
      global_ = fedavg_aggregate<T>(updates);
    } else {
      global_ = fedadagrad_aggregate<T>(*adagrad_, global_, updates);
    }
    RoundSummary s{round_, loss / static_cast<double>(updates.size())};
    ++round_;
    return s;
  }

  // Drops buffered updates of a round that will not complete.
  void discard_round() {
    std::lock_guard lock(mu_);
    buffer_.clear();
  }

 private:
  const RosterEntry* find(const std::string& id) const {
    for (const auto& r : cfg_.roster) {
      if (r.client_id == id) return &r;
    }
    return nullptr;
  }

  RoundConfig cfg_;
  mutable std::mutex mu_;
  std::uint64_t round_ = 0;
  BasicWeights<T> global_;
  std::optional<FedAdagradState> adagrad_;
  std::map<std::string, BasicClientUpdate<T>> buffer_;
};

}  // namespace fedcbmir
