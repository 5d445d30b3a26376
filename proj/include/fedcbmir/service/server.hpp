#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "fedcbmir/cae/model.hpp"
#include "fedcbmir/data/image.hpp"
#include "fedcbmir/data/manifest.hpp"
#include "fedcbmir/errors.hpp"
#include "fedcbmir/io.hpp"
#include "fedcbmir/retrieval/index.hpp"
#include "fedcbmir/retrieval/pipeline.hpp"
#include "fedcbmir/retrieval/search.hpp"

#ifndef FEDCBMIR_VERSION
#define FEDCBMIR_VERSION "0.0.0"
#endif

namespace fedcbmir::service {

namespace fs = std::filesystem;

inline constexpr int kMaxK = 50;

struct ServiceOptions {
  fs::path data_root;   // dataset directory; thumbnails are served from here
  fs::path manifest;    // default: <data_root>/manifest.csv when it exists
  fs::path static_dir;  // optional browser console
};

inline std::string layout_hex(LayoutId id) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id));
  return buf;
}

// A request the service could not honour, with the HTTP status to send.
struct RequestError : Error {
  RequestError(int status, const std::string& what) : Error(what), status(status) {}
  int status;
};

struct QueryRequest {
  Bytes image;
  int k = 5;
  Scenario scenario = Scenario::sen1;
  Magnification magnification = Magnification::none;
  std::optional<Label> truth;
};

inline QueryRequest parse_query_request(const httplib::Request& req) {
  if (!req.is_multipart_form_data()) throw RequestError(400, "expected multipart/form-data");
  if (!req.has_file("image")) throw RequestError(400, "missing image field");
  QueryRequest q;
  const auto& content = req.get_file_value("image").content;
  q.image.assign(content.begin(), content.end());
  auto field = [&](const char* name) -> std::optional<std::string> {
    if (!req.has_file(name)) return std::nullopt;
    return req.get_file_value(name).content;
  };
  if (auto k = field("k")) {
    try {
      std::size_t used = 0;
      q.k = std::stoi(*k, &used);
      if (used != k->size()) throw std::invalid_argument("k");
    } catch (const std::logic_error&) {
      throw RequestError(400, "k must be an integer");
    }
  }
  if (q.k < 1 || q.k > kMaxK) {
    throw RequestError(400, "k must be in [1, " + std::to_string(kMaxK) + "]");
  }
  try {
    if (auto s = field("scenario")) q.scenario = parse_scenario(*s);
    if (auto m = field("magnification")) q.magnification = parse_magnification(*m);
    if (auto l = field("label"); l && !l->empty()) q.truth = parse_label(*l);
  } catch (const Error& e) {
    throw RequestError(400, e.what());
  }
  if (q.scenario == Scenario::sen1 && q.magnification == Magnification::none) {
    throw RequestError(400, "sen1 needs the query magnification");
  }
  return q;
}

// Immutable model+index pair plus the thumbnail whitelist.
struct ServiceState {
  CaeModel<float> model;
  FeatureIndex index;
  std::map<std::string, fs::path> thumbnails;  // indexed id -> file under data_root
};

// Maps indexed ids to image files that resolve inside `root`.
inline std::map<std::string, fs::path> thumbnail_paths(const FeatureIndex& index,
                                                       const ServiceOptions& opts) {
  std::map<std::string, fs::path> out;
  if (opts.data_root.empty()) return out;
  auto manifest_path = opts.manifest;
  if (manifest_path.empty()) manifest_path = opts.data_root / "manifest.csv";
  if (!fs::exists(manifest_path)) return out;
  const auto root = fs::weakly_canonical(opts.data_root);
  const auto m = load_manifest(manifest_path);
  for (const auto& r : m.records) {
    if (!index.contains(r.id)) continue;
    const auto p = fs::weakly_canonical(m.resolve(r));
    const auto rel = p.lexically_relative(root);
    if (rel.empty() || *rel.begin() == "..") continue;
    out[r.id] = p;
  }
  return out;
}

inline nlohmann::json query_response(const ServiceState& st, const QueryRequest& q,
                                     const RetrievalResult& res) {
  auto hits = nlohmann::json::array();
  for (const auto& h : res.hits) {
    nlohmann::json j{{"entry_id", h.entry_id},
                     {"distance", h.distance},
                     {"label", to_string(h.label)},
                     {"magnification", to_string(h.magnification)},
                     {"center", h.center},
                     {"thumbnail_url", nullptr}};
    if (st.thumbnails.count(h.entry_id)) j["thumbnail_url"] = "/thumbnails/" + h.entry_id;
    if (q.truth) j["match"] = h.label == *q.truth;
    hits.push_back(std::move(j));
  }
  nlohmann::json out{{"k", res.k},
                     {"scenario", to_string(res.scenario)},
                     {"magnification", to_string(q.magnification)},
                     {"hits", std::move(hits)},
                     {"elapsed_seconds", res.elapsed_seconds},
                     {"grouped", res.scenario == Scenario::sen2}};
  if (q.truth) out["true_label"] = to_string(*q.truth);
  return out;
}

inline RetrievalResult run_query(const ServiceState& st, const QueryRequest& q) {
  Tensor<float> image;
  try {
    image = to_tensor<float>(decode_image(q.image, "query image"));
    check_image(st.model.config(), image);
  } catch (const Error& e) {
    throw RequestError(400, e.what());
  }
  try {
    return search_image(st.index, st.model, image, q.k, q.scenario, q.magnification);
  } catch (const EmptyPartitionError& e) {
    throw RequestError(422, e.what());
  }
}

class QueryService {
 public:
  explicit QueryService(ServiceOptions opts = {}) : opts_(std::move(opts)) { routes(); }

  QueryService(const QueryService&) = delete;
  QueryService& operator=(const QueryService&) = delete;

  // Installs the model and index; /healthz answers 503 until this happens.
  void load(CaeModel<float> model, FeatureIndex index) {
    require_binding(index, model);
    auto thumbs = thumbnail_paths(index, opts_);
    auto st = std::make_shared<const ServiceState>(
        ServiceState{std::move(model), std::move(index), std::move(thumbs)});
    std::lock_guard lock(mu_);
    if (state_) throw ContractError("service: model and index are already loaded");
    state_ = std::move(st);
  }

  bool loaded() const { return state() != nullptr; }

  httplib::Server& http() { return http_; }

  // Binds host:port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
      bound = http_.bind_to_any_port(host);
    } else if (!http_.bind_to_port(host, port)) {
      bound = -1;
    }
    if (bound < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    return bound;
  }

  bool serve() { return http_.listen_after_bind(); }
  void stop() { http_.stop(); }

 private:
  std::shared_ptr<const ServiceState> state() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  std::string incident_id() {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[24];
    std::snprintf(buf, sizeof buf, "%08llx-%llu", static_cast<unsigned long long>(rng() >> 32),
                  static_cast<unsigned long long>(++incidents_));
    return buf;
  }

  template <class F>
  void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const RequestError& e) {
      send_json(res, e.status, {{"error", e.what()}});
    } catch (const std::exception& e) {
      const auto id = incident_id();
      std::cerr << "internal error " << id << ": " << e.what() << "\n";
      send_json(res, 500, {{"error", "internal error"}, {"id", id}});
    }
  }

  void routes() {
    if (!opts_.static_dir.empty()) {
      if (!http_.set_mount_point("/", opts_.static_dir.string())) {
        throw ConfigError("static dir " + opts_.static_dir.string() + " is not a directory");
      }
    }

    http_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      const auto st = state();
      if (!st) {
        send_json(res, 503, {{"status", "loading"}, {"version", FEDCBMIR_VERSION}});
        return;
      }
      send_json(res, 200,
                {{"status", "ok"},
                 {"version", FEDCBMIR_VERSION},
                 {"layout_id", layout_hex(st->model.layout_id())}});
    });

    http_.Get("/index/stats", [this](const httplib::Request&, httplib::Response& res) {
      const auto st = state();
      if (!st) {
        send_json(res, 503, {{"error", "index is still loading"}});
        return;
      }
      nlohmann::json labels, mags;
      for (auto l : kAllLabels) labels[to_string(l)] = st->index.count(l);
      for (auto m : kMagnificationOrder) mags[to_string(m)] = st->index.count(m);
      send_json(res, 200,
                {{"entries", st->index.size()},
                 {"labels", labels},
                 {"magnifications", mags},
                 {"layout_id", layout_hex(st->index.layout_id())}});
    });

    http_.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto st = state();
        if (!st) throw RequestError(503, "index is still loading");
        const auto q = parse_query_request(req);
        send_json(res, 200, query_response(*st, q, run_query(*st, q)));
      });
    });

    http_.Get(R"(/thumbnails/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto st = state();
        if (!st) throw RequestError(404, "no such thumbnail");
        const auto it = st->thumbnails.find(req.matches[1].str());
        if (it == st->thumbnails.end()) throw RequestError(404, "no such thumbnail");
        const auto bytes = read_file(it->second);
        const auto ext = it->second.extension().string();
        res.set_content(std::string(bytes.begin(), bytes.end()),
                        ext == ".png" ? "image/png" : "application/octet-stream");
      });
    });
  }

  ServiceOptions opts_;
  httplib::Server http_;
  mutable std::mutex mu_;
  std::shared_ptr<const ServiceState> state_;
  std::atomic<unsigned long long> incidents_{0};
};

}  // namespace fedcbmir::service
