#include "litatlas/service.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "litatlas/error.hpp"

namespace litatlas::service {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Response error(int status, std::string_view message, std::optional<std::size_t> position = std::nullopt) {
  return {status, error_json(message, position)};
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    auto item = s.substr(0, comma);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

std::string param(const std::multimap<std::string, std::string>& params, const std::string& key, std::string fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

}  // namespace

std::vector<std::string> required_files() {
  return {"corpus.jsonl", "lda_model.json", "element_markers.csv", "caption_labels.json", "map_lda.json",
          "map_ccp.json"};
}

Artifacts load_artifacts(const fs::path& dir) {
  std::vector<std::string> missing;
  for (const auto& f : required_files())
    if (!fs::is_regular_file(dir / f)) missing.push_back(f);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ValidationError("artifact directory " + dir.string() + " is missing: " + list);
  }
  Artifacts a;
  a.directory = dir;
  a.corpus = corpus::load_corpus(dir / "corpus.jsonl");
  a.model = topics::load_model(dir / "lda_model.json");
  a.markers = chemparse::read_markers_csv(dir / "element_markers.csv");
  a.labels = atlas::caption_labels_from_json(read_file(dir / "caption_labels.json"));
  a.map_lda = atlas::import_map(dir / "map_lda.json");
  a.map_ccp = atlas::import_map(dir / "map_ccp.json");
  return a;
}

// ---------------------------------------------------------------------------

std::string error_json(std::string_view message, std::optional<std::size_t> position) {
  ordered_json j;
  j["error"] = message;
  if (position) j["position"] = *position;
  return j.dump();
}

std::string stats_json(const Artifacts& a) {
  std::size_t labeled = 0;
  for (const auto& l : a.labels.labels) labeled += l.has_value();
  std::size_t elements_present = 0;
  for (std::size_t c = 0; c < a.markers.elements.size(); ++c)
    elements_present += std::any_of(a.markers.rows.begin(), a.markers.rows.end(),
                                    [&](const std::vector<std::uint8_t>& r) { return r[c] != 0; });
  ordered_json j;
  j["documents"] = a.corpus.size();
  j["captions"] = a.corpus.caption_count();
  j["labeled_captions"] = labeled;
  j["topics"] = a.model.K;
  j["vocabulary"] = a.model.vocab_size();
  j["elements_present"] = elements_present;
  j["map_points"] = {{"lda", a.map_lda.points.size()}, {"ccp", a.map_ccp.points.size()}};
  return j.dump();
}

std::string topics_json(const topics::TopicModel& model, std::size_t top_n) {
  std::vector<std::size_t> counts(model.K, 0);
  for (std::size_t d = 0; d < model.num_docs(); ++d) ++counts[topics::assign_topic(model, d)];
  auto arr = ordered_json::array();
  for (std::size_t k = 0; k < model.K; ++k) {
    ordered_json t;
    t["id"] = k;
    t["name"] = model.topic_name(k);
    t["documents"] = counts[k];
    auto& words = t["top_words"] = ordered_json::array();
    for (const auto& [w, p] : topics::top_words(model, k, std::min(top_n, model.vocab_size())))
      words.push_back({{"word", w}, {"weight", p}});
    arr.push_back(std::move(t));
  }
  return ordered_json{{"topics", std::move(arr)}}.dump();
}

std::string labels_json(const atlas::CaptionLabels& labels) {
  std::map<std::string, std::size_t> counts;
  std::size_t unlabeled = 0;
  for (const auto& l : labels.labels) {
    if (l) ++counts[*l];
    else ++unlabeled;
  }
  ordered_json j;
  auto& rules = j["rules"] = ordered_json::array();
  for (const auto& r : labels.rules) {
    const auto it = counts.find(r.label);
    rules.push_back({{"label", r.label},
                     {"priority", r.priority},
                     {"patterns", r.patterns},
                     {"count", it == counts.end() ? 0 : it->second}});
  }
  auto& all = j["counts"] = ordered_json::object();
  for (const auto& l : labels.rule_labels) all[l] = counts.count(l) ? counts[l] : 0;
  j["unlabeled"] = unlabeled;
  return j.dump();
}

std::string query_result_json(const filter::QueryResult& r) {
  ordered_json j;
  j["doc_ids"] = r.doc_ids;
  j["caption_ids"] = r.caption_ids;
  return j.dump();
}

std::string document_json(const Artifacts& a, std::size_t i) {
  const auto& doc = a.corpus[i];
  auto j = ordered_json::parse(corpus::document_to_json_line(doc));
  auto& caps = j["captions"];
  for (std::size_t c = 0; c < doc.captions.size(); ++c) {
    const auto label = a.labels.label_of(doc.captions[c].caption_id);
    caps[c]["caption_id"] = doc.captions[c].caption_id;
    caps[c]["label"] = label ? ordered_json(*label) : ordered_json(nullptr);
  }
  const auto k = topics::assign_topic(a.model, i);
  j["topic"] = k;
  j["topic_name"] = a.model.topic_name(k);
  auto& elements = j["elements"] = ordered_json::array();
  const auto row = std::find(a.markers.doc_ids.begin(), a.markers.doc_ids.end(), doc.doc_id);
  if (row != a.markers.doc_ids.end()) {
    const auto& r = a.markers.rows[static_cast<std::size_t>(row - a.markers.doc_ids.begin())];
    for (std::size_t c = 0; c < r.size(); ++c)
      if (r[c]) elements.push_back(a.markers.elements[c]);
  }
  return j.dump();
}

std::string overlay_json(atlas::MapType map, atlas::OverlayMode mode, const std::vector<std::string>& elements,
                         const std::vector<std::string>& ids) {
  ordered_json j;
  j["map"] = atlas::to_string(map);
  j["mode"] = mode == atlas::OverlayMode::any ? "any" : "all";
  j["elements"] = elements;
  j["ids"] = ids;
  return j.dump();
}

// ---------------------------------------------------------------------------

Service::Service(Artifacts artifacts) : a_(std::move(artifacts)) {
  engine_ = std::make_unique<filter::QueryEngine>(a_.corpus, a_.model, a_.markers, a_.labels);
  if (a_.map_lda.map_type != atlas::MapType::lda || a_.map_ccp.map_type != atlas::MapType::ccp)
    throw SchemaError("map artifacts have the wrong map_type");
  stats_ = stats_json(a_);
  map_lda_ = atlas::map_to_json(a_.map_lda);
  map_ccp_ = atlas::map_to_json(a_.map_ccp);
  topics_ = topics_json(a_.model, kTopWords);
  labels_ = labels_json(a_.labels);
}

Response Service::handle(std::string_view method, std::string_view path,
                         const std::multimap<std::string, std::string>& params, std::string_view body) const {
  const bool get = method == "GET";
  const auto only_get = [&](const std::string& payload) {
    return get ? Response{200, payload} : error(405, "method not allowed");
  };
  if (path == "/stats") return only_get(stats_);
  if (path == "/map/lda") return only_get(map_lda_);
  if (path == "/map/ccp") return only_get(map_ccp_);
  if (path == "/topics") return only_get(topics_);
  if (path == "/labels") return only_get(labels_);
  if (path == "/query") return method == "POST" ? query(body) : error(405, "method not allowed");
  constexpr std::string_view kOverlay = "/overlay/element/";
  if (path.substr(0, kOverlay.size()) == kOverlay) {
    if (!get) return error(405, "method not allowed");
    return overlay(path.substr(kOverlay.size()), params);
  }
  constexpr std::string_view kDoc = "/doc/";
  if (path.substr(0, kDoc.size()) == kDoc) {
    if (!get) return error(405, "method not allowed");
    return document(path.substr(kDoc.size()));
  }
  return error(404, "no such endpoint: " + std::string(path));
}

Response Service::overlay(std::string_view symbol, const std::multimap<std::string, std::string>& params) const {
  try {
    const auto map_type = atlas::map_type_from_string(param(params, "map", "lda"));
    const auto mode = atlas::overlay_mode_from_string(param(params, "mode", "all"));
    std::vector<std::string> elements;
    if (!symbol.empty()) elements.emplace_back(symbol);
    for (auto& e : split_list(param(params, "elements", "")))
      if (std::find(elements.begin(), elements.end(), e) == elements.end()) elements.push_back(std::move(e));
    const auto& map = map_type == atlas::MapType::lda ? a_.map_lda : a_.map_ccp;
    const auto ids = atlas::element_overlay(map, a_.markers, elements, mode);
    return {200, overlay_json(map_type, mode, elements, ids)};
  } catch (const ValidationError& e) {
    return error(400, e.what());
  }
}

Response Service::query(std::string_view body) const {
  std::string expr;
  try {
    const auto j = json::parse(body);
    if (!j.is_object() || !j.contains("expr") || !j["expr"].is_string())
      return error(400, "request body must be {\"expr\": string}");
    expr = j["expr"].get<std::string>();
  } catch (const json::parse_error&) {
    return error(400, "request body is not valid JSON");
  }
  try {
    return {200, query_result_json(engine_->run(expr))};
  } catch (const ParseError& e) {
    return error(400, e.message(), e.position());
  } catch (const ValidationError& e) {
    return error(400, e.what(), e.position());
  }
}

Response Service::document(std::string_view id) const {
  const auto i = a_.corpus.find(id);
  if (!i) return error(404, "unknown document: " + std::string(id));
  return {200, document_json(a_, *i)};
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  const Service& service;
  httplib::Server server;
  explicit Impl(const Service& s) : service(s) {}
};

HttpServer::HttpServer(const Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> params(req.params.begin(), req.params.end());
    const auto r = impl_->service.handle(req.method, req.path, params, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  auto& s = impl_->server;
  s.Get(R"(/.*)", handler);
  s.Post(R"(/.*)", handler);
  s.Put(R"(/.*)", handler);
  s.Delete(R"(/.*)", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError(host, "cannot bind to any port");
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError(host + ":" + std::to_string(port), "cannot bind");
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace litatlas::service
