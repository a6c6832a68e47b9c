#pragma once

// Read-only JSON service over a pipeline output directory.
//
//   GET  /stats
//   GET  /map/lda, /map/ccp
//   GET  /overlay/element/{Symbol}?map=lda|ccp&mode=any|all&elements=F,Cl
//   POST /query {"expr": "..."}
//   GET  /doc/{doc_id}
//   GET  /topics
//   GET  /labels
//
// Errors are {"error": str, "position": int?} with a 4xx status.

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "litatlas/atlas.hpp"
#include "litatlas/chemparse.hpp"
#include "litatlas/corpus.hpp"
#include "litatlas/filter.hpp"
#include "litatlas/topics.hpp"

namespace litatlas::service {

/// Everything the service reads, loaded once at startup.
struct Artifacts {
  std::filesystem::path directory;
  corpus::Corpus corpus;
  topics::TopicModel model;
  chemparse::DocumentElementMatrix markers;
  atlas::CaptionLabels labels;
  atlas::MapDocument map_lda;
  atlas::MapDocument map_ccp;
};

/// Files required in an artifact directory.
std::vector<std::string> required_files();

/// Throws ValidationError naming every missing file, or the underlying error
/// when a file fails to parse.
Artifacts load_artifacts(const std::filesystem::path& dir);

struct Response {
  int status = 200;
  std::string body;
};

/// Payload builders shared by the handlers and the CLI.
std::string stats_json(const Artifacts& a);
std::string topics_json(const topics::TopicModel& model, std::size_t top_n = 10);
std::string labels_json(const atlas::CaptionLabels& labels);
std::string query_result_json(const filter::QueryResult& r);
std::string document_json(const Artifacts& a, std::size_t doc_index);
std::string overlay_json(atlas::MapType map, atlas::OverlayMode mode, const std::vector<std::string>& elements,
                         const std::vector<std::string>& ids);
std::string error_json(std::string_view message, std::optional<std::size_t> position = std::nullopt);

inline constexpr std::size_t kTopWords = 10;

/// Request handling without any transport. Safe to call concurrently.
class Service {
 public:
  explicit Service(Artifacts artifacts);
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// `path` is the decoded request path; `params` the decoded query string.
  Response handle(std::string_view method, std::string_view path, const std::multimap<std::string, std::string>& params,
                  std::string_view body) const;

  const Artifacts& artifacts() const noexcept { return a_; }
  const filter::QueryEngine& engine() const noexcept { return *engine_; }

 private:
  Response overlay(std::string_view symbol, const std::multimap<std::string, std::string>& params) const;
  Response query(std::string_view body) const;
  Response document(std::string_view id) const;

  Artifacts a_;
  std::unique_ptr<filter::QueryEngine> engine_;
  std::string stats_, map_lda_, map_ccp_, topics_, labels_;
};

/// HTTP/1.1 transport over a Service.
class HttpServer {
 public:
  explicit HttpServer(const Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to `port`, or to a free port when `port` is 0. Returns the bound
  /// port; throws IoError on failure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace litatlas::service
