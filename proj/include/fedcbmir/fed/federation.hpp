#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedcbmir/errors.hpp"
#include "fedcbmir/fed/server.hpp"
#include "fedcbmir/transport/message.hpp"

namespace fedcbmir {

// One protocol event as seen by the server. Sends and receipts are recorded
// in roster order so both transports produce the same sequence.
struct TranscriptEntry {
  MessageType type;
  std::uint32_t round = 0;
  std::string client_id;

  friend bool operator==(const TranscriptEntry&, const TranscriptEntry&) = default;
};

using Transcript = std::vector<TranscriptEntry>;

struct RoundRecord {
  std::uint64_t round = 0;
  Strategy strategy = Strategy::fedavg;
  double mean_client_loss = 0.0;
  double wall_ms = 0.0;

  std::string to_json_line() const {
    nlohmann::json j{{"round", round},
                     {"strategy", to_string(strategy)},
                     {"mean_client_loss", mean_client_loss},
                     {"wall_ms", wall_ms}};
    return j.dump();
  }
};

// What the round driver needs from a transport.
template <class T>
class FederationLink {
 public:
  virtual ~FederationLink() = default;

  // Blocks until every roster client has joined.
  virtual void await_joins(const std::vector<std::string>& roster) = 0;
  virtual void send_global(const std::string& client, std::uint64_t round,
                           const BasicWeights<T>& global) = 0;
  // Returns what arrived for `round` once all `expected` clients delivered,
  // or whatever arrived by the collection deadline.
  virtual std::vector<BasicClientUpdate<T>> collect(std::uint64_t round,
                                                    const std::vector<std::string>& expected) = 0;
  // ROUND_DONE or ABORT.
  virtual void send_control(const std::string& client, MessageType type, std::uint64_t round) = 0;
  virtual void close() {}
};

template <class T>
struct FederationResult {
  BasicWeights<T> weights;
  std::vector<RoundRecord> log;
};

// Runs cfg.rounds synchronous rounds: broadcast omega_r, collect K updates,
// aggregate, advance. A missing update aborts the round (ABORT is sent to
// every client) and throws RoundAborted; nothing is partially aggregated.
template <class T>
FederationResult<T> run_federation(const RoundConfig& cfg, BasicWeights<T> initial,
                                   FederationLink<T>& link, Transcript* transcript = nullptr,
                                   const std::function<void(const RoundRecord&)>& on_round = {}) {
  cfg.validate();
  const auto roster = cfg.client_ids();
  auto note = [&](MessageType t, std::uint64_t r, const std::string& c) {
    if (transcript) transcript->push_back({t, static_cast<std::uint32_t>(r), c});
  };

  try {
    link.await_joins(roster);
  } catch (const ProtocolError& e) {
    // Round 0 cannot start; tell whoever did join.
    for (const auto& c : roster) {
      link.send_control(c, MessageType::abort, 0);
      note(MessageType::abort, 0, c);
    }
    link.close();
    throw RoundAborted(0, e.what());
  }
  for (const auto& c : roster) note(MessageType::join, 0, c);

  FederationServer<T> server(cfg, std::move(initial));
  FederationResult<T> result;
  while (!server.finished()) {
    const auto start = std::chrono::steady_clock::now();
    const auto r = server.round();
    const auto global = server.global();
    for (const auto& c : roster) {
      link.send_global(c, r, global);
      note(MessageType::global_weights, r, c);
    }

    auto updates = link.collect(r, roster);
    for (const auto& c : roster) {
      for (auto& u : updates) {
        if (u.client_id != c || u.round != r) continue;
        try {
          server.submit(std::move(u));
          note(MessageType::local_update, r, c);
        } catch (const ProtocolError&) {
          // A malformed update counts as missing.
        }
        break;
      }
    }
    // Anything else that arrived (stale rounds, strangers) is dropped.
    if (!server.ready()) {
      const auto missing = server.missing();
      server.discard_round();
      for (const auto& c : roster) {
        link.send_control(c, MessageType::abort, r);
        note(MessageType::abort, r, c);
      }
      link.close();
      std::string who;
      for (const auto& m : missing) who += (who.empty() ? "" : ", ") + m;
      throw RoundAborted(r, "no update from " + who);
    }

    const auto summary = server.aggregate();
    for (const auto& c : roster) {
      link.send_control(c, MessageType::round_done, r);
      note(MessageType::round_done, r, c);
    }
    RoundRecord rec{summary.round, cfg.strategy, summary.mean_client_loss,
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                        .count()};
    if (on_round) on_round(rec);
    result.log.push_back(rec);
  }
  link.close();
  result.weights = server.global();
  return result;
}

}  // namespace fedcbmir
