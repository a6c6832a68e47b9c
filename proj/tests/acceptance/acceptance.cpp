// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>

#include "httplib.h"
#include "json.hpp"
#include "litatlas/atlas.hpp"
#include "litatlas/chemparse.hpp"
#include "litatlas/embed.hpp"
#include "litatlas/error.hpp"
#include "litatlas/filter.hpp"
#include "litatlas/hashing.hpp"
#include "litatlas/kernels.hpp"
#include "litatlas/pipeline.hpp"
#include "litatlas/relevance.hpp"
#include "litatlas/rng.hpp"
#include "litatlas/service.hpp"
#include "litatlas/textproc.hpp"
#include "litatlas/topics.hpp"
#include "oracles.hpp"

using namespace litatlas;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kData = std::string(LITATLAS_SOURCE_DIR) + "/data";

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------

Outcome tfidf() {
  Clock clock;
  Rng rng(2024);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n_docs = 1 + rng.below(50);
    const auto n_terms = 1 + rng.below(200);
    std::vector<textproc::TokenList> docs(n_docs);
    for (auto& d : docs) {
      const auto len = rng.below(60);
      for (std::uint64_t t = 0; t < len; ++t) d.push_back("w" + std::to_string(rng.below(n_terms)));
    }
    const auto ref = oracle::naive_tfidf(docs);
    const auto vocab = textproc::build_vocabulary(docs);
    if (vocab.terms() != ref.terms) {
      ++mismatches;
      continue;
    }
    for (std::size_t d = 0; d < docs.size(); ++d) {
      std::map<std::string, double> got;
      const auto x = textproc::vectorize_tfidf(docs[d], vocab);
      for (const auto& e : x.entries()) got[vocab.term(e.dim)] = e.weight;
      mismatches += got != ref.rows[d];
    }
  }
  const double t = clock.seconds();
  return {mismatches == 0 && t < 5.0, std::to_string(mismatches) + " mismatched vectors, " + fmt(t) + " s (limit 5 s)"};
}

// ---------------------------------------------------------------------------

textproc::SparseVector dense(const std::vector<double>& v) {
  std::vector<textproc::SparseEntry> e;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) e.push_back({i, v[i]});
  return textproc::SparseVector(e, v.size());
}

Outcome classifier() {
  Rng rng(5);
  relevance::Dataset data;
  while (data.size() < 500) {
    const double a = 2.0 * rng.uniform() - 1.0, b = 2.0 * rng.uniform() - 1.0, c = 2.0 * rng.uniform() - 1.0;
    const double s = 0.8 * a - 0.6 * b + 0.3 * c + 0.1;
    if (std::abs(s) < 0.05) continue;
    data.push_back({dense({a, b, c}), s > 0 ? 1 : 0});
  }
  relevance::TrainConfig cfg;
  cfg.max_iters = 2000;
  const auto model = relevance::train_logreg(data, cfg);
  std::size_t correct = 0;
  for (const auto& ex : data) correct += relevance::classify(model, ex.x) == ex.label;
  const double acc = static_cast<double>(correct) / static_cast<double>(data.size());

  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    relevance::Dataset d;
    const std::size_t dim = 2 + rng.below(6);
    for (std::size_t i = 0; i < 15; ++i) {
      std::vector<double> v(dim, 0.0);
      for (auto& x : v)
        if (rng.below(3)) x = 2.0 * rng.uniform() - 1.0;
      d.push_back({dense(v), static_cast<int>(rng.below(2))});
    }
    std::vector<double> w(dim);
    for (auto& x : w) x = rng.normal();
    const double b = rng.normal(), lambda = 0.1 * rng.uniform();
    const auto [gw, gb] = relevance::loss_gradient(d, w, b, lambda);
    const double h = 1e-6;
    for (std::size_t k = 0; k <= dim; ++k) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (k < dim) wp[k] += h, wm[k] -= h;
      else bp += h, bm -= h;
      const double fd = (relevance::loss(d, wp, bp, lambda) - relevance::loss(d, wm, bm, lambda)) / (2 * h);
      const double g = k < dim ? gw[k] : gb;
      worst = std::max(worst, std::abs(fd - g) / std::max(1.0, std::abs(g)));
    }
  }
  return {acc >= 0.99 && model.meta.iterations <= 2000 && worst <= 1e-5,
          "accuracy " + fmt(acc, 4) + " after " + std::to_string(model.meta.iterations) +
              " iterations (need >= 0.99 within 2000), worst gradient error " + fmt(worst) + " (limit 1e-5)"};
}

// ---------------------------------------------------------------------------

topics::LdaOptions lda_options(std::size_t K, std::size_t passes, std::uint64_t seed) {
  topics::LdaOptions o;
  o.K = K;
  o.passes = passes;
  o.seed = seed;
  return o;
}

Outcome lda_recovery() {
  Clock clock;
  std::size_t good = 0, count_failures = 0;
  std::string purities;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto pc = oracle::planted_corpus(3, 300, 30, 20, 100 + seed);
    const std::size_t V = textproc::build_vocabulary(pc.docs).size();
    std::size_t checked = 0;
    const auto m = topics::fit_lda(pc.docs, lda_options(3, 300, seed), [&](std::size_t, const topics::GibbsCounts& c) {
      ++checked;
      try {
        topics::verify_counts(c, 3, V);
      } catch (const Error&) {
        ++count_failures;
      }
    });
    if (checked != 301) ++count_failures;
    const double purity = oracle::permutation_purity(pc.truth, m.assignments, 3);
    good += purity >= 0.9;
    purities += (purities.empty() ? "" : ",") + fmt(purity, 3);
  }
  const double t = clock.seconds();
  return {good >= 9 && count_failures == 0 && t < 60.0,
          std::to_string(good) + "/10 seeds with purity >= 0.9 [" + purities + "], " + std::to_string(count_failures) +
              " count-invariant failures, " + fmt(t) + " s (limit 60 s)"};
}

Outcome coherence_rank() {
  const auto pc = oracle::planted_corpus(3, 300, 30, 20, 101);
  const auto scan = topics::coherence_scan(pc.docs, {2, 3}, lda_options(3, 300, 1));
  const double c2 = scan.at(0).second, c3 = scan.at(1).second;
  return {scan.at(0).first == 2 && scan.at(1).first == 3 && c3 >= c2,
          "mean coherence K=2 " + fmt(c2, 5) + ", K=3 " + fmt(c3, 5)};
}

// ---------------------------------------------------------------------------

Outcome tsne() {
  Clock clock;
  Rng rng(31);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t n = 8;
    embed::AffinityMatrix A;
    A.n = n;
    A.P = oracle::random_joint(n, rng);
    std::vector<embed::Point> y(n);
    for (auto& p : y) p = {rng.normal(), rng.normal()};
    const auto g = embed::gradient(A, y);
    const double h = 1e-5;
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < 2; ++c) {
        auto yp = y, ym = y;
        yp[i][c] += h;
        ym[i][c] -= h;
        const double fd = (oracle::kl_direct(A.P, n, yp) - oracle::kl_direct(A.P, n, ym)) / (2 * h);
        worst = std::max(worst, std::abs(fd - g[i][c]) / std::max(std::abs(g[i][c]), 1e-3));
      }
  }

  std::size_t separated = 0, kl_ok = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto D = oracle::three_clusters(10, 0.05, 0.9, 0.01, seed);
    const auto A = embed::joint_probabilities(D, 10.0);
    embed::TsneConfig cfg;
    cfg.iters = 600;
    cfg.seed = seed;
    const auto e = embed::tsne_fit(A, cfg);
    double within = 0, between = 0;
    std::size_t nw = 0, nb = 0;
    for (std::size_t i = 0; i < 30; ++i)
      for (std::size_t j = i + 1; j < 30; ++j) {
        const double d = std::hypot(e.coords[i][0] - e.coords[j][0], e.coords[i][1] - e.coords[j][1]);
        if (i / 10 == j / 10) within += d, ++nw;
        else between += d, ++nb;
      }
    separated += within / static_cast<double>(nw) < between / static_cast<double>(nb);

    const auto median = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    };
    const auto& tr = e.kl_trace;
    const auto ex = static_cast<long>(cfg.exaggeration_iters);
    if (tr.size() == cfg.iters && cfg.iters >= cfg.exaggeration_iters + 100) {
      const double early = median({tr.begin() + ex, tr.begin() + ex + 50});
      const double late = median({tr.end() - 50, tr.end()});
      kl_ok += late < early;
    }
  }
  const double t = clock.seconds();
  return {worst <= 1e-4 && separated >= 9 && kl_ok == 10 && t < 30.0,
          "worst gradient error " + fmt(worst) + " (limit 1e-4), " + std::to_string(separated) +
              "/10 seeds separated, KL trace decreasing on " + std::to_string(kl_ok) + "/10, " + fmt(t) +
              " s (limit 30 s)"};
}

// ---------------------------------------------------------------------------

Outcome chemistry() {
  const auto golden = json::parse(oracle::slurp(std::string(LITATLAS_FIXTURES) + "/chem_golden.json"));
  std::size_t exact = 0;
  std::string misses;
  for (const auto& g : golden) {
    const auto input = g.at("input").get<std::string>();
    bool ok = false;
    try {
      const auto syms = chemparse::normalize_species(input).symbols();
      ok = !g.at("elements").is_null() &&
           std::set<std::string>(syms.begin(), syms.end()) == g.at("elements").get<std::set<std::string>>();
    } catch (const chemparse::NotASpeciesError&) {
      ok = g.at("elements").is_null();
    }
    exact += ok;
    if (!ok) misses += " \"" + input + "\"";
  }

  static const std::vector<std::string> alphabet = {"Si", "O", "2", "(", ")", "[", "]", "-", "·", "–", "+", "3", ".",
                                                    "0", "Ca", "x", " ", "₂", "⁺", "Q", "\xff", "^", "{", "Indium",
                                                    "9999999999", "/", ":", "In", "Tin", "Oxide", "\xe2\x82"};
  Rng rng(77);
  std::size_t crashes = 0, round_trip_failures = 0;
  for (int t = 0; t < 50000; ++t) {
    std::string s;
    const auto len = rng.below(16);
    for (std::uint64_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
    try {
      const auto b = chemparse::parse_formula(s);
      round_trip_failures += !(chemparse::parse_formula(chemparse::render_formula(b)) == b);
    } catch (const ParseError&) {
    } catch (const ValidationError&) {
    } catch (...) {
      ++crashes;
    }
    try {
      chemparse::extract_species(s);
      chemparse::normalize_species(s);
    } catch (const Error&) {
    } catch (...) {
      ++crashes;
    }
  }
  return {exact == golden.size() && golden.size() == 50 && crashes == 0 && round_trip_failures == 0,
          std::to_string(exact) + "/" + std::to_string(golden.size()) + " golden entries exact" +
              (misses.empty() ? "" : " (missed:" + misses + ")") + ", fuzz: " + std::to_string(crashes) +
              " unexpected exceptions, " + std::to_string(round_trip_failures) + " round-trip failures in 50000"};
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LITATLAS_ATLAS_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// The bundled configuration with every path pinned and output under `dir`.
fs::path write_config(const fs::path& dir) {
  auto cfg = json::parse(oracle::slurp(kData + "/minicorpus/atlas.json"));
  cfg["inputs"] = {kData + "/minicorpus/corpus.jsonl"};
  cfg["output_dir"] = (dir / "out").string();
  cfg["stopwords"] = kData + "/stopwords.txt";
  cfg["lexicon"] = kData + "/lexicon.json";
  cfg["rules"] = kData + "/rules.json";
  const auto path = dir / "atlas.json";
  oracle::spit(path, cfg.dump(2));
  return path;
}

std::map<std::string, std::string> hashes_on_disk(const fs::path& out) {
  std::map<std::string, std::string> h;
  for (const auto& f : fs::directory_iterator(out))
    if (f.path().filename() != "manifest.json") h[f.path().filename().string()] = sha256_file(f.path());
  return h;
}

Outcome determinism(const fs::path& first, const fs::path& second) {
  Clock clock;
  const int a = run_cli("run --config " + write_config(first).string());
  const int b = run_cli("run --config " + write_config(second).string());
  const double t = clock.seconds();
  if (a != 0 || b != 0) return {false, "atlas run exited with " + std::to_string(a) + " and " + std::to_string(b)};
  const auto ma = pipeline::read_manifest(first / "out" / "manifest.json").artifacts();
  const auto mb = pipeline::read_manifest(second / "out" / "manifest.json").artifacts();
  const auto da = hashes_on_disk(first / "out"), db = hashes_on_disk(second / "out");
  std::size_t differing = 0;
  for (const auto& [name, h] : da) differing += !db.count(name) || db.at(name) != h;
  return {ma == mb && da == db && !ma.empty() && t < 300.0,
          std::to_string(da.size()) + " artifacts, " + std::to_string(differing) + " differing, manifests " +
              (ma == mb ? "equal" : "differ") + ", " + fmt(t) + " s for two runs (limit 300 s)"};
}

// ---------------------------------------------------------------------------

Outcome query_engine(const service::Artifacts& a) {
  const filter::QueryEngine engine(a.corpus, a.model, a.markers, a.labels);
  const oracle::BruteForce brute(a.corpus, a.model, a.markers, a.labels);
  oracle::ExprGenerator gen(oracle::inventory_from(a.corpus, a.model, a.markers, a.labels, 41), 43);

  std::size_t mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    const auto g = gen.expr(3);
    mismatches += engine.run(gen.render(g)).doc_ids != brute.doc_ids(g);
  }

  oracle::GenExpr fluoride;
  fluoride.kind = oracle::GenExpr::and_;
  fluoride.kids = {{oracle::GenExpr::topic, "bioactive", {}},
               {oracle::GenExpr::element, "F", {}},
               {oracle::GenExpr::element, "Cl", {}}};
  const auto fluoride_docs = engine.run("topic:bioactive AND element:F AND element:Cl").doc_ids;
  const bool fluoride_ok = fluoride_docs == brute.doc_ids(fluoride) && !fluoride_docs.empty();

  std::size_t de_morgan = 0;
  for (int i = 0; i < 200; ++i) {
    const auto x = gen.render(gen.expr(2)), y = gen.render(gen.expr(2));
    de_morgan += engine.run("NOT ((" + x + ") AND (" + y + "))").doc_ids ==
                 engine.run("(NOT (" + x + ")) OR (NOT (" + y + "))").doc_ids;
  }
  return {mismatches == 0 && fluoride_ok && de_morgan == 200 && a.corpus.size() == 200,
          std::to_string(500 - mismatches) + "/500 expressions match brute force on " +
              std::to_string(a.corpus.size()) + " docs, bioactive F+Cl expression " + (fluoride_ok ? "matches" : "differs") +
              " (" + std::to_string(fluoride_docs.size()) + " docs), De Morgan " + std::to_string(de_morgan) + "/200"};
}

// ---------------------------------------------------------------------------

Outcome service_parity(const fs::path& dir) {
  const service::Service svc(service::load_artifacts(dir));
  const auto& a = svc.artifacts();
  service::HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  std::thread thread([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);

  std::size_t checks = 0;
  std::vector<std::string> failures;
  const auto expect = [&](const std::string& what, const httplib::Result& r, int status, const std::string& body) {
    ++checks;
    if (!r) {
      failures.push_back(what + ": no response");
      return;
    }
    const bool same = r->status == status && json::parse(r->body, nullptr, false) == json::parse(body, nullptr, false) &&
                      !json::parse(r->body, nullptr, false).is_discarded();
    if (!same) failures.push_back(what);
  };

  expect("/stats", cli.Get("/stats"), 200, service::stats_json(a));
  expect("/map/lda", cli.Get("/map/lda"), 200, atlas::map_to_json(a.map_lda));
  expect("/map/ccp", cli.Get("/map/ccp"), 200, atlas::map_to_json(a.map_ccp));
  expect("/topics", cli.Get("/topics"), 200, service::topics_json(a.model, service::kTopWords));
  expect("/labels", cli.Get("/labels"), 200, service::labels_json(a.labels));
  for (std::size_t i = 0; i < a.corpus.size(); ++i)
    expect("/doc/" + a.corpus[i].doc_id, cli.Get("/doc/" + a.corpus[i].doc_id), 200, service::document_json(a, i));

  oracle::ExprGenerator gen(oracle::inventory_from(a.corpus, a.model, a.markers, a.labels, 5), 6);
  std::vector<std::string> exprs = {"topic:bioactive AND element:F AND element:Cl", "*",
                                    "phrase:\"solid state synthesis\"", "element:Am"};
  for (int i = 0; i < 50; ++i) exprs.push_back(gen.render(gen.expr(3)));
  for (const auto& e : exprs)
    expect("POST /query " + e, cli.Post("/query", json{{"expr", e}}.dump(), "application/json"), 200,
           service::query_result_json(svc.engine().run(e)));
  for (const std::string bad : {"element:F AND (topic:0", "topic:x AND", "phrase:unquoted"}) {
    std::size_t pos = 0;
    try {
      filter::parse_filter(bad);
    } catch (const ParseError& e) {
      pos = e.position();
    }
    const auto r = cli.Post("/query", json{{"expr", bad}}.dump(), "application/json");
    ++checks;
    const auto body = r ? json::parse(r->body, nullptr, false) : json();
    if (!r || r->status != 400 || !body.is_object() || body.value("position", std::size_t{0}) != pos ||
        !body.contains("error"))
      failures.push_back("POST /query " + bad);
  }

  for (const auto& [map_name, map] : {std::pair{"lda", atlas::MapType::lda}, std::pair{"ccp", atlas::MapType::ccp}})
    for (const auto& [mode_name, mode] :
         {std::pair{"all", atlas::OverlayMode::all}, std::pair{"any", atlas::OverlayMode::any}})
      for (const std::vector<std::string> els : {std::vector<std::string>{"F", "Cl"}, {"Si"}, {"Er", "Yb"}, {"Am"}}) {
        std::string list;
        for (std::size_t i = 1; i < els.size(); ++i) list += (i > 1 ? "," : "") + els[i];
        const auto& doc = map == atlas::MapType::lda ? a.map_lda : a.map_ccp;
        const auto ids = atlas::element_overlay(doc, a.markers, els, mode);
        const std::string path = "/overlay/element/" + els[0] + "?map=" + map_name + "&mode=" + mode_name +
                                 (list.empty() ? "" : "&elements=" + list);
        expect(path, cli.Get(path), 200, service::overlay_json(map, mode, els, ids));
      }

  server.stop();
  thread.join();
  std::string detail = std::to_string(checks - failures.size()) + "/" + std::to_string(checks) +
                       " HTTP responses equal the library payloads; no explorer build involved";
  for (std::size_t i = 0; i < std::min<std::size_t>(failures.size(), 5); ++i) detail += "; differs: " + failures[i];
  return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& f) {
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  failures += !o.pass;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
}

}  // namespace

int main() {
  std::cout << "kernels: " << kernels::active().name << std::endl;
  report("tfidf-oracle", tfidf);
  report("classifier", classifier);
  report("lda-planted-recovery", lda_recovery);
  report("lda-coherence-scan", coherence_rank);
  report("tsne", tsne);
  report("chemical-parser", chemistry);

  oracle::TempDir first, second;
  report("pipeline-determinism", [&] { return determinism(first.path(), second.path()); });

  const auto artifacts = [&]() -> std::optional<service::Artifacts> {
    try {
      return service::load_artifacts(first / "out");
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }();
  report("query-engine", [&]() -> Outcome {
    if (!artifacts) return {false, "no pipeline artifacts to query"};
    return query_engine(*artifacts);
  });
  report("service-parity", [&] { return service_parity(first / "out"); });

  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
