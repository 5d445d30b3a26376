#pragma once

#include <png.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedcbmir/cae/model_file.hpp"
#include "fedcbmir/cae/train.hpp"
#include "fedcbmir/data/synth.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/eval/evaluate.hpp"
#include "fedcbmir/fed/client.hpp"
#include "fedcbmir/retrieval/pipeline.hpp"
#include "fedcbmir/transport/sim.hpp"
#include "fedcbmir/transport/wire.hpp"

#ifndef FEDCBMIR_VERSION
#define FEDCBMIR_VERSION "0.0.0"
#endif

namespace fedcbmir::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kProtocol = 3, kData = 4 };

struct RunConfig {
  std::string command;

  fs::path manifest, model, index, out, image, init, data_root, static_dir, port_file;

  std::size_t epochs = 30;
  std::size_t rounds = 30;
  std::size_t local_epochs = 1;
  std::size_t batch = 16;
  double lr = 1e-3;
  std::string optimizer = "adam";
  int k = 5;
  std::string scenario = "sen1";
  std::string strategy = "fedavg";
  std::string rule = "majority";
  double server_lr = 0.1;
  double tau = 1e-3;
  std::string magnification;
  std::string label;
  std::uint64_t seed = 0;

  std::string listen = "127.0.0.1:8470";
  std::string server = "127.0.0.1:8470";
  std::string client_id;
  std::vector<std::string> roster;
  double join_timeout = 60.0;   // seconds
  double round_timeout = 60.0;  // seconds

  std::size_t image_size = 0;  // 0: taken from the data
  std::size_t clients = 4;
  std::size_t train_count = 80;
  std::size_t validation_count = 20;
  std::size_t test_count = 20;

  nlohmann::json to_json() const {
    return {{"command", command},
            {"paths",
             {{"manifest", manifest.string()},
              {"model", model.string()},
              {"index", index.string()},
              {"out", out.string()},
              {"image", image.string()},
              {"init", init.string()},
              {"data_root", data_root.string()},
              {"static_dir", static_dir.string()}}},
            {"hyperparameters",
             {{"epochs", epochs},
              {"rounds", rounds},
              {"local_epochs", local_epochs},
              {"batch", batch},
              {"lr", lr},
              {"optimizer", optimizer},
              {"k", k},
              {"scenario", scenario},
              {"strategy", strategy},
              {"rule", rule},
              {"server_lr", server_lr},
              {"tau", tau},
              {"magnification", magnification},
              {"label", label},
              {"image_size", image_size}}},
            {"synth",
             {{"clients", clients},
              {"train", train_count},
              {"validation", validation_count},
              {"test", test_count}}},
            {"seed", seed},
            {"network",
             {{"listen", listen},
              {"server", server},
              {"client_id", client_id},
              {"roster", roster},
              {"join_timeout_s", join_timeout},
              {"round_timeout_s", round_timeout}}}};
  }
};

inline nlohmann::json build_metadata() {
  return {{"fedcbmir", FEDCBMIR_VERSION},
          {"compiler", __VERSION__},
          {"cplusplus", __cplusplus},
          {"libpng", PNG_LIBPNG_VER_STRING},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

inline fs::path run_record_path(const fs::path& output) { return output.string() + ".run.json"; }

// Full config, seeds and versions, written beside a command's output.
inline void write_run_record(const fs::path& path, const RunConfig& cfg,
                             const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j{{"config", cfg.to_json()}, {"build", build_metadata()}};
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_text(path, j.dump(2) + "\n");
}

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

inline HostPort parse_host_port(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw ConfigError("expected host:port, got '" + text + "'");
  }
  HostPort hp{text.substr(0, colon), 0};
  try {
    std::size_t used = 0;
    const auto p = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || p > 65535) throw std::out_of_range("port");
    hp.port = static_cast<std::uint16_t>(p);
  } catch (const std::logic_error&) {
    throw ConfigError("bad port in '" + text + "'");
  }
  if (hp.host.empty()) hp.host = "0.0.0.0";
  return hp;
}

namespace detail {

inline void require(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string("missing required flag ") + flag);
}

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + s + "'");
}

inline PredictionRule parse_rule(const std::string& s) {
  if (s == "majority") return PredictionRule::majority;
  if (s == "top1") return PredictionRule::top1;
  throw ConfigError("unknown prediction rule '" + s + "'");
}

template <class F>
auto as_config_error(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

inline Magnification flag_magnification(const std::string& s) {
  return as_config_error([&] { return parse_magnification(s); });
}

inline std::optional<Label> flag_label(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return as_config_error([&] { return parse_label(s); });
}

inline LocalTrainingSpec training_spec(const RunConfig& c, std::size_t epochs) {
  if (c.batch == 0) throw ConfigError("--batch must be positive");
  if (!(c.lr > 0)) throw ConfigError("--lr must be positive");
  return {epochs, c.batch, parse_optimizer(c.optimizer), c.lr};
}

// Default architecture at the resolution of the data (or --image-size).
inline CaeConfig model_config(const RunConfig& c, const DatasetManifest* m,
                              const std::vector<ImageRecord>& records) {
  CaeConfig cfg;
  cfg.seed = c.seed;
  if (c.image_size != 0) {
    cfg.height = cfg.width = c.image_size;
  } else {
    if (!m || records.empty()) throw ConfigError("--image-size is required without training data");
    const auto probe = load_image<float>(m->resolve(records.front()));
    cfg.height = probe.shape()[1];
    cfg.width = probe.shape()[2];
  }
  cfg.validate();
  return cfg;
}

inline std::vector<Tensor<float>> load_set(const CaeConfig& cfg, const DatasetManifest& m,
                                           const std::vector<ImageRecord>& records) {
  return load_images(CaeModel<float>::zeros(cfg), m, records);
}

// Training records grouped by center; each center is one federated client.
inline std::map<std::string, std::vector<ImageRecord>> by_center(const DatasetManifest& m) {
  std::map<std::string, std::vector<ImageRecord>> out;
  for (const auto& r : m.select({Split::train})) {
    if (r.center.empty()) throw DataError("record " + r.id + " has no center");
    out[r.center].push_back(r);
  }
  if (out.empty()) throw DataError("manifest has no training images");
  return out;
}

inline RoundConfig round_config(const RunConfig& c) {
  if (c.rounds == 0) throw ConfigError("--rounds must be positive");
  RoundConfig rc;
  rc.rounds = c.rounds;
  rc.local = training_spec(c, c.local_epochs);
  rc.strategy = parse_strategy(c.strategy);
  if (rc.strategy == Strategy::fedadagrad) rc.adagrad = FedAdagradParams{c.server_lr, c.tau};
  rc.seed = c.seed;
  return rc;
}

class RoundLog {
 public:
  explicit RoundLog(const fs::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot write " + path.string());
  }
  void operator()(const RoundRecord& r) {
    out_ << r.to_json_line() << "\n";
    out_.flush();
    std::cerr << "round " << r.round << " mean client loss " << r.mean_client_loss << "\n";
  }

 private:
  std::ofstream out_;
};

inline fs::path round_log_path(const fs::path& model) { return model.string() + ".rounds.jsonl"; }

}  // namespace detail

inline int cmd_synth(const RunConfig& c, std::ostream& out) {
  detail::require(c.out, "--out");
  SynthConfig sc;
  sc.clients = c.clients;
  sc.train = c.train_count;
  sc.validation = c.validation_count;
  sc.test = c.test_count;
  if (c.image_size != 0) sc.image_size = c.image_size;
  sc.seed = c.seed;
  const auto res = synth_generate(sc, c.out);
  write_run_record(c.out / "run.json", c,
                   {{"images", res.combined.records.size()}, {"image_size", sc.image_size}});
  out << "wrote " << res.combined.records.size() << " images for " << sc.clients << " clients to "
      << c.out.string() << "\n";
  return kOk;
}

// Trains one CAE on the manifest's training split.
inline int cmd_train_local(const RunConfig& c, std::ostream& out) {
  detail::require(c.manifest, "--manifest");
  detail::require(c.model, "--model");
  const auto m = load_manifest(c.manifest);
  const auto records = m.select({Split::train});
  if (records.empty()) throw DataError("manifest has no training images");
  auto model = c.init.empty() ? CaeModel<float>::build(detail::model_config(c, &m, records))
                              : load_model(c.init);
  const auto data = detail::load_set(model.config(), m, records);
  const auto spec = detail::training_spec(c, c.epochs);
  const double initial = evaluate_loss<float>(model, data);
  OptimizerState<float> opt{spec.optimizer, spec.learning_rate};
  auto res = train<float>(std::move(model), data, spec.epochs, opt, spec.batch_size,
                          derive_seed(c.seed, "train-local"));
  save_model(c.model, res.model);
  std::ostringstream log;
  for (std::size_t e = 0; e < res.loss_trace.size(); ++e) {
    log << nlohmann::json{{"epoch", e}, {"loss", res.loss_trace[e]}}.dump() << "\n";
  }
  write_text(c.model.string() + ".loss.jsonl", log.str());
  const double final_loss = res.loss_trace.empty() ? initial : res.loss_trace.back();
  write_run_record(run_record_path(c.model), c,
                   {{"initial_loss", initial},
                    {"final_loss", final_loss},
                    {"images", data.size()},
                    {"layout_id", res.model.layout_id()},
                    {"shuffle_seed", derive_seed(c.seed, "train-local")}});
  out << "trained " << spec.epochs << " epochs on " << data.size() << " images; loss " << initial
      << " -> " << final_loss << "\n";
  return kOk;
}

// In-process federation: every center in the manifest is one client.
inline int cmd_fed_sim(const RunConfig& c, std::ostream& out) {
  detail::require(c.manifest, "--manifest");
  detail::require(c.model, "--model");
  const auto m = load_manifest(c.manifest);
  const auto groups = detail::by_center(m);
  auto rc = detail::round_config(c);
  const auto model_cfg = detail::model_config(c, &m, groups.begin()->second);
  const auto init = c.init.empty() ? CaeModel<float>::build(model_cfg) : load_model(c.init);

  std::vector<std::unique_ptr<LocalClient<float>>> clients;
  std::map<std::string, ClientLogic<float>> logic;
  for (const auto& [center, records] : groups) {
    rc.roster.push_back({center, records.size()});
    clients.push_back(std::make_unique<LocalClient<float>>(
        center, detail::load_set(init.config(), m, records), init.config(), rc.local, c.seed));
    auto* client = clients.back().get();
    logic[center] = [client](std::uint64_t r, const ModelWeights& g) { return client->handle(r, g); };
  }
  detail::RoundLog log(detail::round_log_path(c.model));
  auto res = simulate_federation<float>(rc, init.weights(), logic, {}, nullptr, std::ref(log));
  save_model(c.model, CaeModel<float>::from_weights(init.config(), res.weights));
  write_run_record(run_record_path(c.model), c,
                   {{"roster", rc.client_ids()}, {"layout_id", init.layout_id()}});
  out << "federated " << rc.rounds << " rounds over " << rc.roster.size() << " clients\n";
  return kOk;
}

inline int cmd_fed_server(const RunConfig& c, std::ostream& out) {
  detail::require(c.model, "--model");
  auto rc = detail::round_config(c);
  CaeConfig model_cfg;
  if (!c.manifest.empty()) {
    const auto m = load_manifest(c.manifest);
    const auto groups = detail::by_center(m);
    for (const auto& [center, records] : groups) rc.roster.push_back({center, records.size()});
    model_cfg = detail::model_config(c, &m, groups.begin()->second);
  } else {
    if (c.roster.empty()) throw ConfigError("fed-server needs --roster or --manifest");
    for (const auto& id : c.roster) rc.roster.push_back({id, 0});
    model_cfg = detail::model_config(c, nullptr, {});
  }
  const auto init = c.init.empty() ? CaeModel<float>::build(model_cfg) : load_model(c.init);
  const auto hp = parse_host_port(c.listen);
  WireServerLink link(hp.host, hp.port,
                      std::chrono::milliseconds(static_cast<long>(c.round_timeout * 1000)),
                      std::chrono::milliseconds(static_cast<long>(c.join_timeout * 1000)));
  if (!c.port_file.empty()) write_text(c.port_file, std::to_string(link.port()) + "\n");
  std::cerr << "listening on " << hp.host << ":" << link.port() << " for " << rc.roster.size()
            << " clients\n";
  detail::RoundLog log(detail::round_log_path(c.model));
  auto res = run_federation<float>(rc, init.weights(), link, nullptr, std::ref(log));
  save_model(c.model, CaeModel<float>::from_weights(init.config(), res.weights));
  write_run_record(run_record_path(c.model), c,
                   {{"roster", rc.client_ids()}, {"layout_id", init.layout_id()}});
  out << "federated " << rc.rounds << " rounds over " << rc.roster.size() << " clients\n";
  return kOk;
}

// Trains on the manifest's training images whose center equals --client-id.
inline int cmd_fed_client(const RunConfig& c, std::ostream& out) {
  detail::require(c.manifest, "--manifest");
  if (c.client_id.empty()) throw ConfigError("missing required flag --client-id");
  const auto m = load_manifest(c.manifest);
  const auto groups = detail::by_center(m);
  const auto it = groups.find(c.client_id);
  if (it == groups.end()) throw DataError("no training images with center " + c.client_id);
  const auto model_cfg = detail::model_config(c, &m, it->second);
  const auto spec = detail::training_spec(c, c.local_epochs);
  LocalClient<float> client(c.client_id, detail::load_set(model_cfg, m, it->second), model_cfg,
                            spec, c.seed);
  const auto hp = parse_host_port(c.server);
  const auto res = run_wire_client(
      hp.host, hp.port, client,
      std::chrono::milliseconds(static_cast<long>(c.join_timeout * 1000)));
  if (!c.out.empty()) {
    write_run_record(c.out, c, {{"rounds_done", res.rounds_done}, {"aborted", res.outcome == ClientOutcome::aborted}});
  }
  if (res.outcome == ClientOutcome::aborted) {
    std::cerr << "server aborted round " << res.abort_round << "\n";
    return kProtocol;
  }
  out << "client " << c.client_id << " finished " << res.rounds_done << " rounds\n";
  return kOk;
}

// Indexes the training and validation splits.
inline int cmd_index(const RunConfig& c, std::ostream& out) {
  detail::require(c.manifest, "--manifest");
  detail::require(c.model, "--model");
  detail::require(c.out, "--out");
  const auto model = load_model(c.model);
  const auto m = load_manifest(c.manifest);
  const auto index = build_index(model, m);
  save_index(index, c.out);
  write_run_record(run_record_path(c.out), c,
                   {{"entries", index.size()}, {"layout_id", index.layout_id()}});
  out << "indexed " << index.size() << " images\n";
  return kOk;
}

inline std::string match_marker(const Hit& h, const std::optional<Label>& truth) {
  if (!truth) return "-";
  return h.label == *truth ? "match" : "mismatch";
}

// One line per hit: rank, entry-id, distance, label, magnification, center,
// match marker. Sen2 ranks restart in every magnification group.
inline std::string format_hits(const RetrievalResult& r, const std::optional<Label>& truth) {
  std::string s;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.6f", r.elapsed_seconds);
  s += "# query scenario=" + std::string(to_string(r.scenario)) + " k=" + std::to_string(r.k) +
       " hits=" + std::to_string(r.hits.size()) + " elapsed_seconds=" + buf + "\n";
  std::size_t rank = 0;
  std::optional<Magnification> group;
  for (const auto& h : r.hits) {
    if (group != h.magnification) {
      group = h.magnification;
      rank = 0;
    }
    std::snprintf(buf, sizeof buf, "%.6f", h.distance);
    s += std::to_string(++rank) + " " + h.entry_id + " " + buf + " " + to_string(h.label) + " " +
         to_string(h.magnification) + " " + (h.center.empty() ? "-" : h.center) + " " +
         match_marker(h, truth) + "\n";
  }
  return s;
}

inline int cmd_query(const RunConfig& c, std::ostream& out) {
  detail::require(c.model, "--model");
  detail::require(c.index, "--index");
  detail::require(c.image, "--image");
  if (c.k <= 0) throw ConfigError("--k must be positive");
  const auto scenario = parse_scenario(c.scenario);
  const auto mag = detail::flag_magnification(c.magnification);
  const auto truth = detail::flag_label(c.label);
  const auto model = load_model(c.model);
  const auto index = load_index(c.index);
  auto image = load_image<float>(c.image);
  try {
    check_image(model.config(), image);
  } catch (const DimensionError& e) {
    throw LoadError(c.image.string() + ": " + e.what());
  }
  const auto res = search_image(index, model, image, c.k, scenario, mag, c.image.stem().string());
  const auto text = format_hits(res, truth);
  out << text;
  if (!c.out.empty()) {
    write_text(c.out, text);
    write_run_record(run_record_path(c.out), c);
  }
  return kOk;
}

inline int cmd_eval(const RunConfig& c, std::ostream& out) {
  detail::require(c.model, "--model");
  detail::require(c.index, "--index");
  detail::require(c.manifest, "--manifest");
  const auto scenario = parse_scenario(c.scenario);
  const auto rule = detail::parse_rule(c.rule);
  const auto model = load_model(c.model);
  const auto index = load_index(c.index);
  const auto m = load_manifest(c.manifest);
  const auto report = evaluate(index, model, m, c.k, scenario, rule);
  const auto text = format_report(report);
  out << text;
  if (!c.out.empty()) {
    write_text(c.out, text);
    write_run_record(run_record_path(c.out), c,
                     {{"accuracy", report.scores.accuracy}, {"f1", report.scores.f1}});
  }
  return kOk;
}

// Maps the error taxonomy onto the documented exit codes.
inline int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ContractError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ProtocolError& e) {
    err << "protocol error: " << e.what() << "\n";
    return kProtocol;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const DecodeError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace fedcbmir::cli
