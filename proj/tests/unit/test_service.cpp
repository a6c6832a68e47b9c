#include <catch_amalgamated.hpp>

#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "litatlas/error.hpp"
#include "litatlas/hashing.hpp"
#include "litatlas/pipeline.hpp"
#include "litatlas/service.hpp"
#include "oracles.hpp"

using namespace litatlas;
using namespace litatlas::service;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kData = std::string(LITATLAS_SOURCE_DIR) + "/data";

// One small pipeline run shared by every test case in this binary.
const fs::path& artifact_dir() {
  static oracle::TempDir dir;
  static const bool built = [] {
    const json cfg = {{"inputs", kData + "/minicorpus/corpus.jsonl"},
                      {"output_dir", (dir / "out").string()},
                      {"lda", {{"topics", 6}, {"passes", 60}, {"seed", 7},
                               {"topic_anchors", {{{"name", "bioactive"}, {"keywords", {"bioactive", "apatite", "sbf", "fluoride"}}}}}}},
                      {"tsne", {{"iters", 150}, {"exaggeration_iters", 50}, {"momentum_switch_iter", 50}, {"seed", 11}}}};
    pipeline::run_pipeline(pipeline::parse_config(cfg.dump(), dir.path()));
    return true;
  }();
  (void)built;
  static const fs::path out = dir / "out";
  return out;
}

const Service& svc() {
  static const Service s(load_artifacts(artifact_dir()));
  return s;
}

Response get(const std::string& path, std::multimap<std::string, std::string> params = {}) {
  return svc().handle("GET", path, params, "");
}

Response post_query(const std::string& expr) {
  return svc().handle("POST", "/query", {}, json{{"expr", expr}}.dump());
}

std::map<std::string, std::string> artifact_hashes() {
  std::map<std::string, std::string> out;
  for (const auto& f : fs::directory_iterator(artifact_dir())) out[f.path().filename().string()] = sha256_file(f.path());
  return out;
}

}  // namespace

TEST_CASE("startup fails listing missing artifacts") {
  oracle::TempDir empty;
  try {
    load_artifacts(empty.path());
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    for (const auto& f : required_files()) CHECK(std::string(e.what()).find(f) != std::string::npos);
  }
}

TEST_CASE("map endpoints pass artifacts through") {
  for (const std::string m : {"lda", "ccp"}) {
    const auto r = get("/map/" + m);
    CHECK(r.status == 200);
    CHECK(json::parse(r.body) == json::parse(oracle::slurp(artifact_dir() / ("map_" + m + ".json"))));
  }
}

TEST_CASE("query parity with the library") {
  const auto& a = svc().artifacts();
  const filter::QueryEngine engine(a.corpus, a.model, a.markers, a.labels);
  for (const std::string expr : {"topic:bioactive AND element:F AND element:Cl", "phrase:\"solid state synthesis\"",
                                 "element:Am", "*", "caption:SEM OR NOT element:Si"}) {
    const auto r = post_query(expr);
    REQUIRE(r.status == 200);
    const auto lib = engine.run(expr);
    const auto j = json::parse(r.body);
    CHECK(j.at("doc_ids").get<std::vector<std::string>>() == lib.doc_ids);
    CHECK(j.at("caption_ids").get<std::vector<std::string>>() == lib.caption_ids);
  }
  CHECK(!engine.run("topic:bioactive AND element:F AND element:Cl").doc_ids.empty());
}

TEST_CASE("query errors") {
  const auto syntax = post_query("element:F AND (topic:0");
  CHECK(syntax.status == 400);
  const auto j = json::parse(syntax.body);
  CHECK(j.at("position") == 22);
  CHECK(j.at("error").is_string());

  const auto unknown = post_query("element:F AND element:Qq");
  CHECK(unknown.status == 400);
  CHECK(json::parse(unknown.body).at("position") == 14);

  CHECK(svc().handle("POST", "/query", {}, "not json").status == 400);
  CHECK(svc().handle("POST", "/query", {}, "{\"exp\":1}").status == 400);
  CHECK(svc().handle("GET", "/query", {}, "").status == 405);
  CHECK(svc().handle("POST", "/stats", {}, "").status == 405);
}

TEST_CASE("stats, topics, labels and documents") {
  const auto& a = svc().artifacts();
  CHECK(json::parse(get("/stats").body) == json::parse(stats_json(a)));
  CHECK(json::parse(get("/stats").body).at("documents") == a.corpus.size());

  const auto topics = json::parse(get("/topics").body).at("topics");
  REQUIRE(topics.size() == a.model.K);
  for (std::size_t k = 0; k < a.model.K; ++k) {
    const auto words = topics::top_words(a.model, k, kTopWords);
    REQUIRE(topics[k].at("top_words").size() == words.size());
    for (std::size_t i = 0; i < words.size(); ++i) CHECK(topics[k]["top_words"][i]["word"] == words[i].first);
    CHECK(topics[k].at("name") == a.model.topic_name(k));
  }

  const auto labels = json::parse(get("/labels").body);
  std::size_t labeled = 0;
  for (const auto& [label, n] : labels.at("counts").items()) labeled += n.get<std::size_t>();
  CHECK(labeled + labels.at("unlabeled").get<std::size_t>() == a.corpus.caption_count());
  CHECK(labels.at("rules").size() == a.labels.rules.size());

  const auto& d = a.corpus[3];
  const auto doc = get("/doc/" + d.doc_id);
  REQUIRE(doc.status == 200);
  const auto dj = json::parse(doc.body);
  CHECK(dj.at("doc_id") == d.doc_id);
  CHECK(dj.at("abstract") == d.abstract);
  CHECK(dj.at("captions").size() == d.captions.size());
  CHECK(dj.at("topic") == topics::assign_topic(a.model, 3));
  CHECK(get("/doc/10.0/none").status == 404);
  CHECK(get("/nowhere").status == 404);
}

TEST_CASE("overlay parity") {
  const auto& a = svc().artifacts();
  const auto r = get("/overlay/element/F", {{"elements", "F,Cl"}});
  REQUIRE(r.status == 200);
  const auto j = json::parse(r.body);
  CHECK(j.at("mode") == "all");
  CHECK(j.at("ids").get<std::vector<std::string>>() ==
        atlas::element_overlay(a.map_lda, a.markers, {"F", "Cl"}, atlas::OverlayMode::all));
  const auto ccp = get("/overlay/element/Am", {{"map", "ccp"}, {"mode", "any"}});
  REQUIRE(ccp.status == 200);
  CHECK(json::parse(ccp.body).at("ids").get<std::vector<std::string>>() ==
        atlas::element_overlay(a.map_ccp, a.markers, {"Am"}, atlas::OverlayMode::any));
  CHECK(get("/overlay/element/Qq").status == 400);
  CHECK(get("/overlay/element/F", {{"mode", "some"}}).status == 400);
  CHECK(get("/overlay/element/F", {{"map", "xyz"}}).status == 400);
}

TEST_CASE("HTTP transport and a request storm leave artifacts untouched") {
  const auto before = artifact_hashes();
  HttpServer server(svc());
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread t([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);
  for (int i = 0; i < 50; ++i) {
    auto s = cli.Get("/stats");
    REQUIRE(s);
    CHECK(s->status == 200);
    CHECK(s->body == get("/stats").body);
    auto q = cli.Post("/query", json{{"expr", "element:F AND element:Cl"}}.dump(), "application/json");
    REQUIRE(q);
    CHECK(q->body == post_query("element:F AND element:Cl").body);
    auto o = cli.Get("/overlay/element/Cl?map=ccp&mode=any&elements=F");
    REQUIRE(o);
    CHECK(o->body == get("/overlay/element/Cl", {{"map", "ccp"}, {"mode", "any"}, {"elements", "F"}}).body);
    auto bad = cli.Post("/query", "{\"expr\":\"(\"}", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(bad->get_header_value("Content-Type").find("application/json") == 0);
    auto del = cli.Delete("/map/lda");
    REQUIRE(del);
    CHECK(del->status == 405);
  }
  const auto& d = svc().artifacts().corpus[0];
  auto doc = cli.Get("/doc/" + d.doc_id);
  REQUIRE(doc);
  CHECK(doc->status == 200);
  server.stop();
  t.join();
  CHECK(artifact_hashes() == before);
}
