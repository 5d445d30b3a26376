// Acceptance suite: one PASS/FAIL line per criterion; exits 1 if any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fedcbmir/cae/model_file.hpp"
#include "fedcbmir/cae/train.hpp"
#include "fedcbmir/cli/commands.hpp"
#include "fedcbmir/data/synth.hpp"
#include "fedcbmir/eval/evaluate.hpp"
#include "fedcbmir/fed/aggregate.hpp"
#include "fedcbmir/fed/client.hpp"
#include "fedcbmir/fed/serialize.hpp"
#include "fedcbmir/retrieval/index.hpp"
#include "fedcbmir/retrieval/search.hpp"
#include "fedcbmir/transport/sim.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace fedcbmir;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kFedAvgRelTol = 1e-6;
constexpr double kFedAvgBudget = 10.0;
constexpr double kEquivalenceRelTol = 1e-5;
constexpr double kEquivalenceBudget = 120.0;
constexpr double kGradientStep = 1e-4;
constexpr double kGradientRelTol = 1e-4;
constexpr double kGradientBudget = 300.0;
constexpr double kRetrievalBudget = 10.0;
constexpr double kTransportBudget = 180.0;
constexpr double kEndToEndBudget = 1800.0;
constexpr double kMinFederatedF1 = 0.85;
constexpr int kMinClientsFedAtLeastLocal = 3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fedcbmir-acceptance-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome fedavg_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kd(1, 8);
  std::uniform_int_distribution<std::uint64_t> nd(1, 5000);
  std::normal_distribution<float> wd(0.0f, 1.0f);
  constexpr std::size_t kDim = 10000;
  double worst = 0;
  bool convex = true, invariant = true;
  for (int set = 0; set < 100; ++set) {
    std::vector<ClientUpdate> u;
    const int k = kd(rng);
    for (int c = 0; c < k; ++c) {
      ModelWeights w{42, std::vector<float>(kDim)};
      for (auto& v : w.values) v = wd(rng);
      u.push_back({"client-" + std::to_string(c), 0, nd(rng), std::move(w), 0.0});
    }
    const auto agg = fedavg_aggregate<float>(u);
    std::vector<std::vector<float>> ws;
    std::vector<std::uint64_t> ns;
    for (const auto& c : u) {
      ws.push_back(c.weights.values);
      ns.push_back(c.n_k);
    }
    const auto ref = oracle::weighted_mean(ws, ns);
    for (std::size_t i = 0; i < kDim; ++i) {
      worst = std::max(worst, oracle::rel_err(agg.values[i], ref[i]));
      float lo = ws[0][i], hi = ws[0][i];
      for (const auto& w : ws) {
        lo = std::min(lo, w[i]);
        hi = std::max(hi, w[i]);
      }
      convex = convex && agg.values[i] >= lo && agg.values[i] <= hi;
    }
    std::shuffle(u.begin(), u.end(), rng);
    invariant = invariant && fedavg_aggregate<float>(u) == agg;
  }
  const double t = seconds_since(t0);
  return {worst <= kFedAvgRelTol && convex && invariant && t < kFedAvgBudget,
          "max rel err " + fmt("%.2e", worst) + ", convex " + (convex ? "yes" : "NO") +
              ", permutation-invariant " + (invariant ? "yes" : "NO") + ", " + fmt("%.1f", t) +
              " s"};
}

Outcome one_step_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = testing_support::tiny_config(21);
  constexpr double lr = 0.05;
  constexpr int rounds = 5;
  // Three clients with different data and sizes.
  std::map<std::string, std::vector<Tensor<double>>> data;
  std::vector<Tensor<double>> everything;
  std::mt19937_64 rng(77);
  for (auto [id, n] : {std::pair{"a", 2}, std::pair{"b", 3}, std::pair{"c", 4}}) {
    for (int i = 0; i < n; ++i) {
      data[id].push_back(testing_support::random_image<double>(cfg, rng));
      everything.push_back(data[id].back());
    }
  }
  const LocalTrainingSpec sgd{1, 64, OptimizerKind::sgd, lr};
  RoundConfig rc;
  rc.rounds = rounds;
  rc.local = sgd;
  std::map<std::string, ClientLogic<double>> logic;
  for (const auto& [id, imgs] : data) {
    rc.roster.push_back({id, imgs.size()});
    logic[id] = [&, id = id](std::uint64_t r, const BasicWeights<double>& g) {
      return client_local_train<double>(g, data.at(id), cfg, sgd, id, r, 1);
    };
  }
  const auto init = CaeModel<double>::build(cfg);
  const auto fed = simulate_federation<double>(rc, init.weights_as<double>(), logic);

  auto central = init;
  const double n = static_cast<double>(everything.size());
  for (int r = 0; r < rounds; ++r) {
    std::vector<double> grad(central.parameter_count(), 0.0);
    for (const auto& img : everything) {
      const auto lg = loss_and_gradient(central, img);
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += lg.gradient[i] / n;
    }
    for (std::size_t i = 0; i < grad.size(); ++i) central.params()[i] -= lr * grad[i];
  }
  double worst = 0;
  for (std::size_t i = 0; i < fed.weights.values.size(); ++i) {
    worst = std::max(worst, oracle::rel_err(fed.weights.values[i], central.params()[i]));
  }
  const bool moved = fed.weights.values != init.weights_as<double>().values;
  const double t = seconds_since(t0);
  return {worst <= kEquivalenceRelTol && moved && t < kEquivalenceBudget,
          "3 clients (2/3/4 images), 5 rounds, max rel err " + fmt("%.2e", worst) + ", " +
              fmt("%.1f", t) + " s"};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  auto [m, image] = testing_support::smooth_toy_point();
  const auto lg = loss_and_gradient(m, image);
  double worst = 0;
  std::string worst_layer;
  for (const auto& layer : m.layout().layers()) {
    double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i = 0; i < element_count(layer.shape); ++i) {
      const std::size_t idx = layer.offset + i;
      auto mp = m, mm = m;
      mp.params()[idx] += kGradientStep;
      mm.params()[idx] -= kGradientStep;
      const double fd = (mse(forward(mp, image), image) - mse(forward(mm, image), image)) /
                        (2 * kGradientStep);
      const double an = lg.gradient[idx];
      diff2 += (an - fd) * (an - fd);
      a2 += an * an;
      n2 += fd * fd;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    if (rel > worst) {
      worst = rel;
      worst_layer = layer.name;
    }
  }
  const double t = seconds_since(t0);
  return {worst <= kGradientRelTol && t < kGradientBudget,
          std::to_string(m.layout().layers().size()) + " parameter groups, worst rel err " +
              fmt("%.2e", worst) + " (" + worst_layer + "), " + fmt("%.1f", t) + " s"};
}

Outcome retrieval_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(5);
  std::normal_distribution<float> d;
  std::vector<IndexEntry> entries;
  std::vector<std::vector<float>> vecs;
  for (int i = 0; i < 1000; ++i) {
    std::vector<float> v(kFeatureDim);
    // Every tenth entry duplicates an earlier one, so ties occur.
    if (i >= 100 && i % 10 == 0) {
      v = vecs[static_cast<std::size_t>(i / 10)];
    } else {
      for (auto& x : v) x = d(rng);
    }
    vecs.push_back(v);
    entries.push_back({"e" + std::to_string(i), v, i % 3 ? Label::benign : Label::malignant,
                       Magnification::x40, "c", Split::train});
  }
  const FeatureIndex index(1, entries);
  std::size_t checked = 0, mismatched = 0;
  for (int q = 0; q < 100; ++q) {
    std::vector<float> query(kFeatureDim);
    if (q % 4 == 0) {
      query = vecs[static_cast<std::size_t>(q * 3 + 10)];  // lands on an entry, often a tied one
    } else {
      for (auto& x : query) x = d(rng);
    }
    std::vector<double> dist;
    for (const auto& v : vecs) dist.push_back(oracle::euclidean(query, v));
    for (int k : {1, 5, 10}) {
      const auto ref = oracle::brute_force_topk(dist, static_cast<std::size_t>(k));
      const auto got = search(index, query, k, Scenario::sen1, Magnification::x40);
      ++checked;
      bool same = got.hits.size() == ref.size();
      for (std::size_t i = 0; same && i < ref.size(); ++i) {
        same = got.hits[i].position == ref[i] && got.hits[i].entry_id == entries[ref[i]].id;
      }
      if (!same) ++mismatched;
    }
  }
  const double t = seconds_since(t0);
  return {mismatched == 0 && t < kRetrievalBudget,
          std::to_string(checked - mismatched) + "/" + std::to_string(checked) +
              " (query, K) pairs exact, " + fmt("%.2f", t) + " s"};
}

struct Proc {
  int code = -1;
  std::string out;
};

Proc run_cli(const std::string& args) {
  const std::string cmd = std::string(FEDCBMIR_CLI) + " " + args + " 2>&1";
  Proc r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Outcome transport_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = scratch("transport");
  auto path = [&](const char* rel) { return (dir / rel).string(); };
  if (run_cli("synth --out " + path("data") + " --clients 2 --train 16 --validation 2 --test 2 --seed 4")
          .code != 0) {
    return {false, "synth failed"};
  }
  const std::string common = " --manifest " + path("data/manifest.csv") + " --rounds 3 --seed 9";
  const auto sim = run_cli("fed-sim" + common + " --model " + path("sim.fcwb"));
  if (sim.code != 0) return {false, "fed-sim exited " + std::to_string(sim.code)};
  auto server = std::async(std::launch::async, [&] {
    return run_cli("fed-server" + common + " --listen 127.0.0.1:0 --port-file " + path("port") +
                   " --model " + path("net.fcwb"));
  });
  std::string port;
  while (port.empty() && seconds_since(t0) < kTransportBudget) {
    if (fs::exists(path("port"))) {
      std::istringstream(read_text(path("port"))) >> port;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  std::vector<std::future<Proc>> clients;
  for (const char* id : {"center-1", "center-2"}) {
    clients.push_back(std::async(std::launch::async, [&, id = std::string(id)] {
      return run_cli("fed-client --manifest " + path("data/manifest.csv") + " --seed 9 --client-id " +
                     id + " --server 127.0.0.1:" + port);
    }));
  }
  int client_fail = 0;
  for (auto& c : clients) client_fail += c.get().code != 0;
  const auto srv = server.get();
  if (srv.code != 0 || client_fail) {
    return {false, "server exited " + std::to_string(srv.code) + ", " + std::to_string(client_fail) +
                       " client failures"};
  }
  const auto a = read_file(path("sim.fcwb"));
  const auto b = read_file(path("net.fcwb"));
  const double t = seconds_since(t0);
  fs::remove_all(dir);
  return {a == b && t < kTransportBudget,
          "2 clients, 3 rounds, " + std::to_string(a.size()) + " weight bytes " +
              (a == b ? "identical" : "DIFFER") + ", " + fmt("%.1f", t) + " s"};
}

template <class F>
DecodeFault fault_of(F&& f) {
  try {
    f();
  } catch (const DecodeError& e) {
    return e.fault;
  }
  return static_cast<DecodeFault>(-1);
}

Outcome serialization() {
  const auto dir = scratch("serialization");
  std::vector<std::string> problems;
  const auto model = CaeModel<float>::build(testing_support::tiny_config(3, kFeatureDim));
  save_model(dir / "m.fcwb", model);
  const auto back = load_model(dir / "m.fcwb");
  if (back.weights() != model.weights() || back.config() != model.config()) {
    problems.push_back("model round-trip");
  }
  const auto blob = read_file(dir / "m.fcwb");
  if (serialize_weights(back.weights()) != blob) problems.push_back("weight bytes");

  std::mt19937_64 rng(8);
  std::normal_distribution<float> d;
  std::vector<IndexEntry> entries;
  for (int i = 0; i < 50; ++i) {
    std::vector<float> v(kFeatureDim);
    for (auto& x : v) x = d(rng);
    entries.push_back({"id-" + std::to_string(i), v, static_cast<Label>(i % 4),
                       static_cast<Magnification>(i % 5), "center", i % 2 ? Split::train : Split::validation});
  }
  const FeatureIndex index(model.layout_id(), entries);
  save_index(index, dir / "i.fcix");
  const auto ibytes = read_file(dir / "i.fcix");
  if (!(load_index(dir / "i.fcix") == index) || serialize_index(load_index(dir / "i.fcix")) != ibytes) {
    problems.push_back("index round-trip");
  }

  auto corrupt = [](Bytes b, std::size_t at) {
    b[at] ^= 0xff;
    return b;
  };
  auto cut = [](Bytes b, std::size_t keep) {
    b.resize(keep);
    return b;
  };
  auto extend = [](Bytes b) {
    b.push_back(0);
    return b;
  };
  struct Case {
    const char* name;
    Bytes bytes;
    DecodeFault want;
    bool index;
  };
  const std::vector<Case> cases{
      {"weights magic", corrupt(blob, 0), DecodeFault::bad_magic, false},
      {"weights version", corrupt(blob, 4), DecodeFault::bad_version, false},
      {"weights layout", corrupt(blob, 6), DecodeFault::layout_mismatch, false},
      {"weights truncated", cut(blob, blob.size() - 3), DecodeFault::truncated, false},
      {"weights trailing", extend(blob), DecodeFault::length_mismatch, false},
      {"index magic", corrupt(ibytes, 1), DecodeFault::bad_magic, true},
      {"index version", corrupt(ibytes, 5), DecodeFault::bad_version, true},
      {"index truncated", cut(ibytes, ibytes.size() - 7), DecodeFault::truncated, true},
      {"index trailing", extend(ibytes), DecodeFault::length_mismatch, true},
  };
  for (const auto& c : cases) {
    const auto got = fault_of([&] {
      if (c.index) {
        deserialize_index(c.bytes);
      } else {
        deserialize_weights(c.bytes, model.layout_id());
      }
    });
    if (got != c.want) problems.push_back(c.name);
  }
  fs::remove_all(dir);
  std::string detail = "model, weights and index round-trip; " + std::to_string(cases.size()) +
                       " corruptions typed";
  if (!problems.empty()) {
    detail = "problems:";
    for (const auto& p : problems) detail += " [" + p + "]";
  }
  return {problems.empty(), detail};
}

Outcome metrics_fixture() {
  // q0..q3 truly malignant, predicted M M M B; q4..q7 truly benign, predicted M B B B.
  constexpr Label M = Label::malignant, B = Label::benign;
  const Label truth[8] = {M, M, M, M, B, B, B, B};
  const Label predicted[8] = {M, M, M, B, M, B, B, B};
  std::vector<IndexEntry> entries;
  std::vector<EvalQuery> queries;
  auto point = [](double x, double y) {
    std::vector<float> v(kFeatureDim, 0.0f);
    v[0] = static_cast<float>(x);
    v[1] = static_cast<float>(y);
    return v;
  };
  for (int q = 0; q < 8; ++q) {
    const Label other = predicted[q] == M ? B : M;
    const Label cluster[3] = {predicted[q], other, predicted[q]};
    for (int j = 0; j < 3; ++j) {
      entries.push_back({"q" + std::to_string(q) + "-n" + std::to_string(j),
                         point(100.0 * q, j + 1.0), cluster[j], Magnification::x40, "c", Split::train});
    }
    queries.push_back({"q" + std::to_string(q), point(100.0 * q, 0), truth[q], Magnification::x40});
  }
  const auto r = evaluate_features(FeatureIndex(1, entries), queries, 3, Scenario::sen1);
  const auto& cm = r.confusion;
  const bool ok = cm.tp == 3 && cm.fp == 1 && cm.fn == 1 && cm.tn == 3 && r.scores.accuracy == 0.75 &&
                  r.scores.precision == 0.75 && r.scores.f1 == 0.75;
  return {ok, "tp=" + std::to_string(cm.tp) + " fp=" + std::to_string(cm.fp) + " fn=" +
                  std::to_string(cm.fn) + " tn=" + std::to_string(cm.tn) + " accuracy=" +
                  fmt("%.6f", r.scores.accuracy) + " precision=" + fmt("%.6f", r.scores.precision) +
                  " f1=" + fmt("%.6f", r.scores.f1)};
}

// Shared by the end-to-end and Sen2 criteria.
struct EndToEnd {
  fs::path dir;
  SynthOutput data;
  CaeModel<float> federated = CaeModel<float>::zeros(CaeConfig{});
  bool ready = false;
};

EndToEnd& e2e_state() {
  static EndToEnd s;
  return s;
}

Outcome synthetic_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  auto& st = e2e_state();
  st.dir = scratch("e2e");
  SynthConfig sc;  // 4 clients x (80 train, 20 validation, 20 test), 32x32
  sc.seed = 7;
  st.data = synth_generate(sc, st.dir);
  CaeConfig cfg;
  cfg.height = cfg.width = sc.image_size;
  cfg.seed = 11;
  const auto init = CaeModel<float>::build(cfg);
  const LocalTrainingSpec spec{1, 16, OptimizerKind::adam, 1e-3};
  constexpr std::size_t kRounds = 30;
  constexpr std::uint64_t kRunSeed = 3;

  std::vector<std::unique_ptr<LocalClient<float>>> clients;
  std::vector<std::vector<Tensor<float>>> train_sets;
  std::map<std::string, ClientLogic<float>> logic;
  RoundConfig rc;
  rc.rounds = kRounds;
  rc.local = spec;
  rc.seed = kRunSeed;
  for (std::size_t k = 0; k < sc.clients; ++k) {
    const auto& m = st.data.clients[k];
    train_sets.push_back(load_images(init, m, m.select({Split::train})));
    const auto id = "center-" + std::to_string(k + 1);
    clients.push_back(std::make_unique<LocalClient<float>>(id, train_sets.back(), cfg, spec, kRunSeed));
    rc.roster.push_back({id, train_sets.back().size()});
    auto* c = clients.back().get();
    logic[id] = [c](std::uint64_t r, const ModelWeights& g) { return c->handle(r, g); };
  }
  nlohmann::json rounds = nlohmann::json::array();
  const auto fed = simulate_federation<float>(rc, init.weights(), logic, {}, nullptr,
                                              [&](const RoundRecord& r) {
                                                rounds.push_back(nlohmann::json::parse(r.to_json_line()));
                                              });
  st.federated = CaeModel<float>::from_weights(cfg, fed.weights);
  st.ready = true;
  const double fed_seconds = seconds_since(t0);

  auto sen1_f1 = [&](const CaeModel<float>& model, std::size_t k) {
    const auto& m = st.data.clients[k];
    return evaluate(build_index(model, m), model, m, 5, Scenario::sen1).scores.f1;
  };
  std::vector<double> f1_init, f1_fed, f1_local;
  int fed_at_least_local = 0;
  bool all_above = true;
  for (std::size_t k = 0; k < sc.clients; ++k) {
    auto opt = OptimizerState<float>::adam_with(spec.learning_rate);
    const auto local = train<float>(init, train_sets[k], kRounds * spec.epochs, opt, spec.batch_size,
                                    derive_seed(kRunSeed, "local-only/center-" + std::to_string(k + 1)));
    f1_init.push_back(sen1_f1(init, k));
    f1_fed.push_back(sen1_f1(st.federated, k));
    f1_local.push_back(sen1_f1(local.model, k));
    all_above = all_above && f1_fed.back() >= kMinFederatedF1;
    fed_at_least_local += f1_fed.back() >= f1_local.back();
  }
  const double t = seconds_since(t0);
  const bool pass = all_above && fed_at_least_local >= kMinClientsFedAtLeastLocal && t < kEndToEndBudget;

  nlohmann::json record{
      {"criterion", "synthetic end-to-end"},
      {"thresholds",
       {{"min_federated_f1_every_client", kMinFederatedF1},
        {"min_clients_federated_f1_at_least_local", kMinClientsFedAtLeastLocal},
        {"budget_seconds", kEndToEndBudget}}},
      {"synth",
       {{"clients", sc.clients},
        {"train", sc.train},
        {"validation", sc.validation},
        {"test", sc.test},
        {"image_size", sc.image_size},
        {"seed", sc.seed}}},
      {"model", config_to_json(cfg)},
      {"federation",
       {{"rounds", kRounds},
        {"local_epochs", spec.epochs},
        {"batch", spec.batch_size},
        {"optimizer", "adam"},
        {"lr", spec.learning_rate},
        {"strategy", "fedavg"},
        {"run_seed", kRunSeed}}},
      {"local_only", {{"epochs", kRounds * spec.epochs}, {"optimizer", "adam"}, {"lr", spec.learning_rate}}},
      {"evaluation", {{"k", 5}, {"scenario", "sen1"}, {"rule", "majority"}}},
      {"f1_untrained", f1_init},
      {"f1_federated", f1_fed},
      {"f1_local_only", f1_local},
      {"round_log", rounds},
      {"federated_seconds", fed_seconds},
      {"total_seconds", t},
      {"pass", pass},
      {"build", cli::build_metadata()}};
  write_text("acceptance-e2e.run.json", record.dump(2) + "\n");

  std::string detail = "federated F1";
  for (double f : f1_fed) detail += " " + fmt("%.3f", f);
  detail += "; local F1";
  for (double f : f1_local) detail += " " + fmt("%.3f", f);
  detail += "; fed>=local on " + std::to_string(fed_at_least_local) + "/4; " + fmt("%.0f", t) + " s";
  return {pass, detail};
}

Outcome sen2_contract() {
  auto& st = e2e_state();
  if (!st.ready) return {false, "end-to-end model unavailable"};
  const auto& m = st.data.combined;
  const auto index = build_index(st.federated, m);
  std::size_t queries = 0, bad = 0;
  for (const auto& r : m.select({Split::test})) {
    const auto img = load_model_input(st.federated, m, r);
    const auto res = search_image(index, st.federated, img, 5, Scenario::sen2, r.magnification, r.id);
    const auto groups = res.groups();
    bool ok = groups.size() == 4;
    for (std::size_t g = 0; ok && g < groups.size(); ++g) {
      ok = groups[g].first == kMagnificationOrder[g] && groups[g].second.size() == 5;
      for (const auto& h : groups[g].second) ok = ok && h.magnification == groups[g].first;
    }
    ++queries;
    bad += !ok;
  }
  const auto report = evaluate(index, st.federated, m, 5, Scenario::sen2);
  const auto text = format_report(report);
  bool cms = report.group_confusion.size() == 4 && text.find("pooled tp=") != std::string::npos;
  for (auto mag : {"40x", "100x", "200x", "400x"}) {
    cms = cms && text.find(std::string("group ") + mag + " tp=") != std::string::npos;
  }
  for (const auto& [mag, cm] : report.group_confusion) cms = cms && cm.total() == queries;
  return {bad == 0 && cms, std::to_string(queries - bad) + "/" + std::to_string(queries) +
                               " queries with 4 homogeneous groups of 5; per-group and pooled CMs " +
                               (cms ? "emitted" : "MISSING")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"fedavg-oracle", fedavg_oracle},
      {"one-local-step-equivalence", one_step_equivalence},
      {"gradient-check", gradient_check},
      {"retrieval-oracle", retrieval_oracle},
      {"transport-equivalence", transport_equivalence},
      {"serialization", serialization},
      {"metrics-fixture", metrics_fixture},
      {"synthetic-end-to-end", synthetic_end_to_end},
      {"sen2-contract", sen2_contract},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  fs::remove_all(fs::temp_directory_path() / ("fedcbmir-acceptance-" + std::to_string(::getpid())));
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
