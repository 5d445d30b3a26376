#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fedcbmir/data/synth.hpp"
#include "fedcbmir/retrieval/pipeline.hpp"
#include "fedcbmir/service/server.hpp"

using namespace fedcbmir;
using namespace fedcbmir::service;
namespace fs = std::filesystem;

namespace {

struct Shared {
  fs::path dir;
  SynthOutput data;
  CaeConfig cfg;
};

Shared& shared() {
  static Shared s = [] {
    Shared s;
    s.dir = fs::temp_directory_path() / ("fedcbmir-service-" + std::to_string(::getpid()));
    fs::remove_all(s.dir);
    SynthConfig sc;
    sc.train = 6;
    sc.validation = 2;
    sc.test = 2;
    sc.image_size = 16;
    sc.seed = 3;
    s.data = synth_generate(sc, s.dir);
    s.cfg.height = s.cfg.width = 16;
    s.cfg.seed = 8;
    return s;
  }();
  return s;
}

class Service : public ::testing::Test {
 protected:
  static void TearDownTestSuite() { fs::remove_all(shared().dir); }

  void SetUp() override {
    svc = std::make_unique<QueryService>(ServiceOptions{shared().dir, {}, {}});
    port = svc->bind("127.0.0.1", 0);
    thread = std::thread([this] { svc->serve(); });
    svc->http().wait_until_ready();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }

  void TearDown() override {
    svc->stop();
    thread.join();
  }

  CaeModel<float> model() const { return CaeModel<float>::build(shared().cfg); }

  void load_full() { svc->load(model(), build_index(model(), shared().data.combined)); }

  httplib::Result post(const std::string& image, const std::string& k, const std::string& scenario,
                       const std::string& mag, const std::string& label = {}) {
    httplib::MultipartFormDataItems items{{"image", image, "q.png", "image/png"}};
    if (!k.empty()) items.push_back({"k", k, "", ""});
    if (!scenario.empty()) items.push_back({"scenario", scenario, "", ""});
    if (!mag.empty()) items.push_back({"magnification", mag, "", ""});
    if (!label.empty()) items.push_back({"label", label, "", ""});
    return client->Post("/query", items);
  }

  static std::string test_png(const std::string& id) {
    const auto& m = shared().data.combined;
    for (const auto& r : m.records) {
      if (r.id == id) {
        const auto b = read_file(m.resolve(r));
        return std::string(b.begin(), b.end());
      }
    }
    return {};
  }

  std::unique_ptr<QueryService> svc;
  int port = 0;
  std::thread thread;
  std::unique_ptr<httplib::Client> client;
};

void expect_parity(const nlohmann::json& body, const RetrievalResult& lib) {
  ASSERT_EQ(body["hits"].size(), lib.hits.size());
  for (std::size_t i = 0; i < lib.hits.size(); ++i) {
    const auto& h = body["hits"][i];
    EXPECT_EQ(h["entry_id"], lib.hits[i].entry_id);
    EXPECT_EQ(h["distance"].get<double>(), lib.hits[i].distance);
    EXPECT_EQ(h["label"], to_string(lib.hits[i].label));
    EXPECT_EQ(h["magnification"], to_string(lib.hits[i].magnification));
    EXPECT_EQ(h["center"], lib.hits[i].center);
  }
}

}  // namespace

TEST_F(Service, HealthzLoadingThenReady) {
  auto r = client->Get("/healthz");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 503);
  EXPECT_EQ(post(test_png("c1-test-0000"), "5", "sen1", "40")->status, 503);
  load_full();
  r = client->Get("/healthz");
  ASSERT_EQ(r->status, 200);
  const auto j = nlohmann::json::parse(r->body);
  EXPECT_EQ(j["version"], FEDCBMIR_VERSION);
  EXPECT_EQ(j["layout_id"], layout_hex(model().layout_id()));
}

TEST_F(Service, Sen1ParityWithLibrary) {
  load_full();
  const auto png = test_png("c2-test-0001");
  const auto r = post(png, "5", "sen1", "100x", "malignant");
  ASSERT_EQ(r->status, 200) << r->body;
  const auto body = nlohmann::json::parse(r->body);
  const auto idx = build_index(model(), shared().data.combined);
  const auto img = to_tensor<float>(decode_image(Bytes(png.begin(), png.end())));
  const auto lib = search_image(idx, model(), img, 5, Scenario::sen1, Magnification::x100);
  expect_parity(body, lib);
  EXPECT_FALSE(body["grouped"].get<bool>());
  double last = 0;
  for (const auto& h : body["hits"]) {
    EXPECT_GE(h["distance"].get<double>(), last);
    last = h["distance"].get<double>();
    EXPECT_EQ(h["match"].get<bool>(), h["label"] == "malignant");
    EXPECT_EQ(h["thumbnail_url"], "/thumbnails/" + h["entry_id"].get<std::string>());
  }
}

TEST_F(Service, Sen2FourGroupsOfK) {
  load_full();
  const auto png = test_png("c3-test-0000");
  const auto r = post(png, "5", "sen2", "200");
  ASSERT_EQ(r->status, 200) << r->body;
  const auto body = nlohmann::json::parse(r->body);
  EXPECT_TRUE(body["grouped"].get<bool>());
  ASSERT_EQ(body["hits"].size(), 20u);
  const char* order[4] = {"40x", "100x", "200x", "400x"};
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(body["hits"][i]["magnification"], order[i / 5]);
  const auto idx = build_index(model(), shared().data.combined);
  const auto img = to_tensor<float>(decode_image(Bytes(png.begin(), png.end())));
  expect_parity(body, search_image(idx, model(), img, 5, Scenario::sen2, Magnification::x200));
}

TEST_F(Service, BadRequests) {
  load_full();
  const auto png = test_png("c1-test-0000");
  EXPECT_EQ(post(png, "0", "sen1", "40")->status, 400);
  EXPECT_EQ(post(png, "51", "sen1", "40")->status, 400);
  EXPECT_EQ(post(png, "5x", "sen1", "40")->status, 400);
  EXPECT_EQ(post(png, "5", "sen3", "40")->status, 400);
  EXPECT_EQ(post(png, "5", "sen1", "35")->status, 400);
  EXPECT_EQ(post(png, "5", "sen1", "")->status, 400);
  EXPECT_EQ(post(png, "5", "sen1", "40", "purple")->status, 400);
  EXPECT_EQ(post("not an image", "5", "sen1", "40")->status, 400);
  const auto big = encode_png(RgbImage{32, 32, std::vector<std::uint8_t>(32 * 32 * 3, 7)});
  EXPECT_EQ(post(std::string(big.begin(), big.end()), "5", "sen1", "40")->status, 400);
  EXPECT_EQ(client->Post("/query", "{}", "application/json")->status, 400);
  EXPECT_EQ(post(png, "50", "sen1", "40")->status, 200);
}

TEST_F(Service, Sen1MagnificationAbsentIs422) {
  // Only the 40x and 100x clients are indexed.
  auto m = shared().data.combined;
  std::erase_if(m.records, [](const ImageRecord& r) {
    return r.magnification == Magnification::x200 || r.magnification == Magnification::x400;
  });
  svc->load(model(), build_index(model(), m));
  const auto r = post(test_png("c1-test-0000"), "5", "sen1", "400");
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(post(test_png("c1-test-0000"), "5", "sen1", "")->status, 400);
  EXPECT_EQ(post(test_png("c1-test-0000"), "5", "sen1", "40")->status, 200);
}

TEST_F(Service, StatsMatchManifest) {
  load_full();
  const auto r = client->Get("/index/stats");
  ASSERT_EQ(r->status, 200);
  const auto j = nlohmann::json::parse(r->body);
  const auto indexed = compute_stats(shared().data.combined.select({Split::train, Split::validation}));
  EXPECT_EQ(j["entries"], indexed.total());
  EXPECT_EQ(j["labels"]["benign"], indexed.count(Label::benign));
  EXPECT_EQ(j["labels"]["malignant"], indexed.count(Label::malignant));
  EXPECT_EQ(j["magnifications"]["40x"], indexed.count(Magnification::x40));
  EXPECT_EQ(j["magnifications"]["400x"], indexed.count(Magnification::x400));
  EXPECT_EQ(j["layout_id"], layout_hex(model().layout_id()));
}

TEST_F(Service, ThumbnailsOnlyForIndexedIds) {
  load_full();
  auto r = client->Get("/thumbnails/c1-train-0000");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(r->body, test_png("c1-train-0000"));
  EXPECT_EQ(client->Get("/thumbnails/c1-test-0000")->status, 404);
  EXPECT_EQ(client->Get("/thumbnails/..%2Fmanifest.csv")->status, 404);
  EXPECT_EQ(client->Get("/thumbnails/../manifest.csv")->status, 404);
}

TEST_F(Service, InternalErrorHasOpaqueId) {
  // Move a thumbnail away after load: the file read fails inside the handler.
  load_full();
  const auto& m = shared().data.combined;
  const auto path = m.resolve(m.records.front());
  fs::rename(path, path.string() + ".moved");
  const auto r = client->Get("/thumbnails/" + m.records.front().id);
  fs::rename(path.string() + ".moved", path);
  ASSERT_EQ(r->status, 500);
  const auto j = nlohmann::json::parse(r->body);
  EXPECT_EQ(j["error"], "internal error");
  EXPECT_FALSE(j["id"].get<std::string>().empty());
  EXPECT_EQ(r->body.find(path.string()), std::string::npos);
}

TEST_F(Service, ConcurrentIdenticalRequestsAgree) {
  load_full();
  const auto png = test_png("c4-test-0001");
  const auto reference = nlohmann::json::parse(post(png, "7", "sen2", "400")->body)["hits"];
  std::vector<std::thread> workers;
  std::vector<nlohmann::json> seen(8);
  for (std::size_t t = 0; t < seen.size(); ++t) {
    workers.emplace_back([&, t] {
      httplib::Client c("127.0.0.1", port);
      httplib::MultipartFormDataItems items{{"image", png, "q.png", "image/png"},
                                            {"k", "7", "", ""},
                                            {"scenario", "sen2", "", ""},
                                            {"magnification", "400", "", ""}};
      for (int i = 0; i < 3; ++i) {
        auto r = c.Post("/query", items);
        if (r && r->status == 200) seen[t] = nlohmann::json::parse(r->body)["hits"];
        if (seen[t] != reference) return;
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& s : seen) EXPECT_EQ(s, reference);
}

TEST(ServiceStatic, MountsConsoleDirectory) {
  const auto dir = fs::temp_directory_path() / ("fedcbmir-static-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  write_text(dir / "index.html", "<p>console</p>");
  QueryService svc(ServiceOptions{{}, {}, dir});
  const int port = svc.bind("127.0.0.1", 0);
  std::thread t([&] { svc.serve(); });
  svc.http().wait_until_ready();
  httplib::Client c("127.0.0.1", port);
  const auto r = c.Get("/index.html");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->body, "<p>console</p>");
  svc.stop();
  t.join();
  fs::remove_all(dir);
}

TEST_F(Service, StatsForTableShapedIndex) {
  // 40x row of the BreaKHis breakdown: 625 benign, 1370 malignant.
  std::vector<IndexEntry> entries;
  for (int i = 0; i < 625 + 1370; ++i) {
    entries.push_back({"p" + std::to_string(i), std::vector<float>(kFeatureDim, static_cast<float>(i)),
                       i < 625 ? Label::benign : Label::malignant, Magnification::x40, "c1",
                       Split::train});
  }
  svc->load(model(), FeatureIndex(model().layout_id(), std::move(entries)));
  const auto j = nlohmann::json::parse(client->Get("/index/stats")->body);
  EXPECT_EQ(j["entries"], 1995);
  EXPECT_EQ(j["labels"]["benign"], 625);
  EXPECT_EQ(j["labels"]["malignant"], 1370);
  EXPECT_EQ(j["magnifications"]["40x"], 1995);
}
