// atlas: command-line front end for the literature atlas pipeline.
//
// Exit codes: 0 success, 2 validation error, 3 stage failure.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "litatlas/atlas.hpp"
#include "litatlas/chemparse.hpp"
#include "litatlas/corpus.hpp"
#include "litatlas/embed.hpp"
#include "litatlas/error.hpp"
#include "litatlas/filter.hpp"
#include "litatlas/pipeline.hpp"
#include "litatlas/relevance.hpp"
#include "litatlas/service.hpp"
#include "litatlas/textproc.hpp"
#include "litatlas/topics.hpp"

namespace fs = std::filesystem;
using namespace litatlas;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << data << '\n';
  if (!out) throw IoError(path.string(), "write failure");
}

textproc::StopwordSet stopwords_from(const std::string& path) {
  return path.empty() ? textproc::default_stopwords() : textproc::load_stopwords(path);
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v == 0) throw ValidationError("expected a positive integer, got \"" + item + "\"");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(item);
  return out;
}

// --- classify --------------------------------------------------------------

struct ClassifyTrainArgs {
  std::string labeled, output, stopwords;
  relevance::TrainConfig config;
  double split_ratio = 0.8;
};

void classify_train(const ClassifyTrainArgs& a) {
  const auto set = corpus::load_labeled_set(a.labeled);
  const auto sw = stopwords_from(a.stopwords);
  std::vector<textproc::TokenList> tokens;
  for (const auto& l : set) tokens.push_back(textproc::tokenize(l.doc.abstract, sw));

  // The vocabulary comes from the training split only.
  relevance::Dataset index_set;
  for (std::size_t i = 0; i < set.size(); ++i)
    index_set.push_back({textproc::SparseVector({{i, 1.0}}, set.size()), set[i].label});
  const auto [train_idx, test_idx] = relevance::split(index_set, a.split_ratio, a.config.seed);
  const auto row = [](const relevance::Example& e) { return e.x.entries().front().dim; };

  std::vector<textproc::TokenList> train_tokens;
  for (const auto& e : train_idx) train_tokens.push_back(tokens[row(e)]);
  const auto vocab = textproc::build_vocabulary(train_tokens);
  const auto to_dataset = [&](const relevance::Dataset& idx) {
    relevance::Dataset d;
    for (const auto& e : idx) d.push_back({textproc::vectorize_tfidf(tokens[row(e)], vocab), e.label});
    return d;
  };
  const auto train = to_dataset(train_idx);
  const auto test = to_dataset(test_idx);

  auto model = relevance::train_logreg(train, a.config);
  model.vocab = vocab;
  relevance::save_model(model, a.output);

  nlohmann::ordered_json report;
  const auto put = [](const relevance::EvalMetrics& m) {
    return nlohmann::ordered_json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
                                  {"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
  };
  report["iterations"] = model.meta.iterations;
  report["final_loss"] = model.meta.final_loss;
  report["train"] = put(relevance::evaluate(model, train));
  if (!test.empty()) report["test"] = put(relevance::evaluate(model, test));
  std::cout << report.dump(2) << '\n';
}

struct ClassifyApplyArgs {
  std::string model, corpus, output, stopwords;
  bool keep = false;
};

void classify_apply(const ClassifyApplyArgs& a) {
  const auto model = relevance::load_model(a.model);
  if (!model.vocab) throw ValidationError(a.model + ": model has no vocabulary");
  const auto sw = stopwords_from(a.stopwords);
  const auto c = corpus::load_corpus(a.corpus);
  std::vector<corpus::Document> out;
  std::size_t relevant = 0;
  for (auto d : c.documents()) {
    d.relevant = relevance::classify(model, textproc::vectorize_tfidf(textproc::tokenize(d.abstract, sw), *model.vocab)) == 1;
    relevant += *d.relevant;
    if (*d.relevant || a.keep) out.push_back(std::move(d));
  }
  corpus::save_corpus(corpus::Corpus(std::move(out)), a.output);
  std::cerr << relevant << " of " << c.size() << " documents classified relevant\n";
}

// --- lda -------------------------------------------------------------------

struct LdaArgs {
  std::string corpus, output, stopwords, topic_names, scan, parent;
  std::optional<double> alpha;
  topics::LdaOptions options;
  std::optional<std::size_t> subtopic;
  std::size_t top_words = 10;
};

void lda(const LdaArgs& a) {
  const auto c = corpus::load_corpus(a.corpus);
  const auto sw = stopwords_from(a.stopwords);
  std::vector<textproc::TokenList> docs;
  for (const auto& d : c.documents()) docs.push_back(topics::document_tokens(d, sw));
  auto options = a.options;
  options.alpha = a.alpha;

  if (!a.scan.empty()) {
    for (const auto& [K, score] : topics::coherence_scan(docs, parse_sizes(a.scan), options, a.top_words))
      std::cout << K << '\t' << score << '\n';
    return;
  }
  if (a.output.empty()) throw ValidationError("--output is required unless --scan is given");

  topics::TopicModel model;
  if (a.subtopic) {
    if (a.parent.empty()) throw ValidationError("--subtopic needs --model with the parent model");
    const auto parent = topics::load_model(a.parent);
    auto fit = topics::refit_subtopics(docs, parent, *a.subtopic, options);
    model = std::move(fit.model);
  } else {
    model = topics::fit_lda(docs, options);
  }
  if (!a.topic_names.empty()) {
    model.topic_names = split_names(a.topic_names);
    if (model.topic_names.size() > model.K) throw ValidationError("more topic names than topics");
    model.topic_names.resize(model.K);
  }
  topics::save_model(model, a.output);
  for (std::size_t k = 0; k < model.K; ++k) {
    std::cout << model.topic_name(k) << ':';
    for (const auto& [w, p] : topics::top_words(model, k, std::min(a.top_words, model.vocab_size()))) std::cout << ' ' << w;
    std::cout << '\n';
  }
}

// --- embed -----------------------------------------------------------------

struct EmbedArgs {
  std::string corpus, output, target = "abstracts", stopwords;
  double perplexity = 30.0;
  embed::TsneConfig config;
};

void embed_cmd(const EmbedArgs& a) {
  const auto c = corpus::load_corpus(a.corpus);
  const auto sw = stopwords_from(a.stopwords);
  std::vector<std::string> ids;
  std::vector<textproc::TokenList> tokens;
  for (const auto& d : c.documents()) {
    if (a.target == "abstracts") {
      ids.push_back(d.doc_id);
      tokens.push_back(textproc::tokenize(d.abstract, sw));
    } else {
      for (const auto& cap : d.captions) {
        ids.push_back(cap.caption_id);
        tokens.push_back(textproc::tokenize(cap.text, sw));
      }
    }
  }
  const auto vocab = textproc::build_vocabulary(tokens);
  std::vector<textproc::SparseVector> vectors;
  for (const auto& t : tokens) vectors.push_back(textproc::vectorize_tfidf(t, vocab));
  const auto e = embed::embed_vectors(vectors, a.perplexity, a.config);
  embed::write_embedding(e, ids, a.output, embed::sidecar_path(a.output));
  std::cerr << "final KL " << (e.kl_trace.empty() ? 0.0 : e.kl_trace.back()) << " (" << e.kernels << " kernels)\n";
}

// --- serve -----------------------------------------------------------------

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Literature atlas: topic, caption and element maps over article corpora"};
  app.require_subcommand(1);

  // ingest
  std::vector<std::string> ingest_inputs;
  std::string ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Read XML records or corpus files into one corpus file");
  ingest->add_option("inputs", ingest_inputs, "XML files, XML directories or corpus .jsonl files")->required();
  ingest->add_option("-o,--output", ingest_out, "Corpus output path")->required();

  // classify
  auto* classify = app.add_subcommand("classify", "Relevance classifier");
  classify->require_subcommand(1);
  ClassifyTrainArgs train_args;
  std::optional<std::uint64_t> train_seed;
  auto* train = classify->add_subcommand("train", "Train on a labeled set");
  train->add_option("--labeled", train_args.labeled, "Labeled corpus file (label 0|1 per line)")->required();
  train->add_option("-o,--output", train_args.output, "Model output path")->required();
  train->add_option("--seed", train_seed, "Split seed")->required();
  train->add_option("--learning-rate", train_args.config.learning_rate)->capture_default_str();
  train->add_option("--lambda", train_args.config.l2_lambda, "L2 strength")->capture_default_str();
  train->add_option("--max-iters", train_args.config.max_iters)->capture_default_str();
  train->add_option("--tol", train_args.config.tol)->capture_default_str();
  train->add_option("--split", train_args.split_ratio, "Training fraction")->capture_default_str();
  train->add_option("--stopwords", train_args.stopwords);
  ClassifyApplyArgs apply_args;
  auto* apply = classify->add_subcommand("apply", "Mark documents relevant or not and drop the rest");
  apply->add_option("--model", apply_args.model)->required();
  apply->add_option("--corpus", apply_args.corpus)->required();
  apply->add_option("-o,--output", apply_args.output)->required();
  apply->add_option("--stopwords", apply_args.stopwords);
  apply->add_flag("--keep-irrelevant", apply_args.keep, "Keep irrelevant documents, marked relevant=false");

  // lda
  LdaArgs lda_args;
  std::optional<std::uint64_t> lda_seed;
  auto* lda_cmd = app.add_subcommand("lda", "Fit an LDA topic model");
  lda_cmd->add_option("--corpus", lda_args.corpus)->required();
  lda_cmd->add_option("-o,--output", lda_args.output, "Model output path");
  lda_cmd->add_option("--topics", lda_args.options.K)->capture_default_str();
  lda_cmd->add_option("--passes", lda_args.options.passes)->capture_default_str();
  lda_cmd->add_option("--seed", lda_seed)->required();
  lda_cmd->add_option("--alpha", lda_args.alpha, "Document-topic prior (default 50/K)");
  lda_cmd->add_option("--beta", lda_args.options.beta)->capture_default_str();
  lda_cmd->add_option("--average-last", lda_args.options.average_last, "Average the last N sweeps");
  lda_cmd->add_option("--topic-names", lda_args.topic_names, "Comma-separated names by topic id");
  lda_cmd->add_option("--scan", lda_args.scan, "Comma-separated K values; prints mean coherence per K");
  lda_cmd->add_option("--subtopic", lda_args.subtopic, "Refit the documents of this parent topic");
  lda_cmd->add_option("--model", lda_args.parent, "Parent model for --subtopic");
  lda_cmd->add_option("--top-words", lda_args.top_words)->capture_default_str();
  lda_cmd->add_option("--stopwords", lda_args.stopwords);

  // embed
  EmbedArgs embed_args;
  std::optional<std::uint64_t> embed_seed;
  auto* embed_sub = app.add_subcommand("embed", "t-SNE embedding of abstracts or captions");
  embed_sub->add_option("--corpus", embed_args.corpus)->required();
  embed_sub->add_option("-o,--output", embed_args.output, "CSV path; the sidecar is written next to it")->required();
  embed_sub->add_option("--target", embed_args.target)->check(CLI::IsMember({"abstracts", "captions"}))->capture_default_str();
  embed_sub->add_option("--perplexity", embed_args.perplexity)->capture_default_str();
  embed_sub->add_option("--iters", embed_args.config.iters)->capture_default_str();
  embed_sub->add_option("--learning-rate", embed_args.config.learning_rate)->capture_default_str();
  embed_sub->add_option("--seed", embed_seed)->required();
  embed_sub->add_option("--stopwords", embed_args.stopwords);

  // chem
  auto* chem = app.add_subcommand("chem", "Chemical species");
  chem->require_subcommand(1);
  std::string chem_corpus, chem_out, chem_lexicon;
  std::size_t min_species_docs = 1;
  auto* extract = chem->add_subcommand("extract", "Write per-document element markers");
  extract->add_option("--corpus", chem_corpus)->required();
  extract->add_option("-o,--output", chem_out)->required();
  extract->add_option("--lexicon", chem_lexicon);
  extract->add_option("--min-species-docs", min_species_docs, "Ignore species seen in fewer documents")
      ->capture_default_str();

  // captions
  auto* captions = app.add_subcommand("captions", "Caption labels");
  captions->require_subcommand(1);
  std::string cap_corpus, cap_rules, cap_out;
  auto* label = captions->add_subcommand("label", "Label captions by rule");
  label->add_option("--corpus", cap_corpus)->required();
  label->add_option("--rules", cap_rules, "Rule file (default: bundled rules)");
  label->add_option("-o,--output", cap_out)->required();

  // map
  auto* map = app.add_subcommand("map", "Map artifacts");
  map->require_subcommand(1);
  std::string map_type = "lda", map_embedding, map_model, map_labels, map_out;
  auto* build = map->add_subcommand("build", "Build a map from an embedding");
  build->add_option("--type", map_type)->check(CLI::IsMember({"lda", "ccp"}))->required();
  build->add_option("--embedding", map_embedding)->required();
  build->add_option("--model", map_model, "LDA model (lda maps)");
  build->add_option("--labels", map_labels, "Caption labels (ccp maps)");
  build->add_option("-o,--output", map_out)->required();
  std::string profile_map;
  auto* profile = map->add_subcommand("profile", "Distances from placed labels to the four default axes");
  profile->add_option("--map", profile_map)->required();

  // query
  std::string query_expr, query_dir = "out";
  bool query_captions = false;
  auto* query = app.add_subcommand("query", "Print matching doc_ids, one per line");
  query->add_option("expr", query_expr)->required();
  query->add_option("--dir", query_dir, "Artifact directory")->capture_default_str();
  query->add_flag("--captions", query_captions, "Print matching caption_ids instead");

  // serve
  std::string serve_dir = "out", serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve artifacts over HTTP");
  serve->add_option("--dir", serve_dir)->capture_default_str();
  serve->add_option("--port", serve_port)->capture_default_str();
  serve->add_option("--host", serve_host)->capture_default_str();

  // run
  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the full pipeline from a config file");
  run->add_option("--config", config_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*ingest) {
      std::vector<fs::path> paths(ingest_inputs.begin(), ingest_inputs.end());
      const auto c = corpus::ingest(paths);
      corpus::save_corpus(c, ingest_out);
      std::cerr << c.size() << " documents, " << c.caption_count() << " captions\n";
    } else if (*train) {
      train_args.config.seed = *train_seed;
      classify_train(train_args);
    } else if (*apply) {
      classify_apply(apply_args);
    } else if (*lda_cmd) {
      lda_args.options.seed = *lda_seed;
      lda(lda_args);
    } else if (*embed_sub) {
      embed_args.config.seed = *embed_seed;
      embed_cmd(embed_args);
    } else if (*extract) {
      const auto c = corpus::load_corpus(chem_corpus);
      const auto lexicon = chem_lexicon.empty() ? chemparse::Lexicon::bundled() : chemparse::Lexicon::load(chem_lexicon);
      const auto species = chemparse::extract_corpus_species(c, lexicon);
      chemparse::write_markers_csv(chemparse::element_markers(c, species, lexicon.elements(), min_species_docs), chem_out);
    } else if (*label) {
      const auto c = corpus::load_corpus(cap_corpus);
      const auto rules = cap_rules.empty() ? atlas::bundled_rules() : atlas::load_rules(cap_rules);
      write_file(cap_out, atlas::caption_labels_to_json(atlas::label_captions(c, rules)));
    } else if (*build) {
      const auto emb = embed::read_embedding_csv(map_embedding);
      atlas::MapDocument m;
      if (atlas::map_type_from_string(map_type) == atlas::MapType::lda) {
        if (map_model.empty()) throw ValidationError("lda maps need --model");
        m = atlas::build_lda_map(emb.ids, emb.coords, topics::load_model(map_model));
      } else {
        if (map_labels.empty()) throw ValidationError("ccp maps need --labels");
        m = atlas::build_ccp_map(emb.ids, emb.coords, atlas::caption_labels_from_json(read_file(map_labels)));
      }
      atlas::export_map(m, map_out);
    } else if (*profile) {
      const auto m = atlas::import_map(profile_map);
      const auto p = atlas::axis_profile(m.labels, atlas::default_anchors(m));
      for (std::size_t i = 0; i < p.labels.size(); ++i) {
        std::cout << p.labels[i] << '\t' << p.anchors[p.nearest[i]].name << (p.boundary[i] ? "\tboundary" : "");
        for (const double d : p.distances[i]) std::cout << '\t' << d;
        std::cout << '\n';
      }
    } else if (*query) {
      const auto artifacts = service::load_artifacts(query_dir);
      const filter::QueryEngine engine(artifacts.corpus, artifacts.model, artifacts.markers, artifacts.labels);
      const auto r = engine.run(query_expr);
      for (const auto& id : query_captions ? r.caption_ids : r.doc_ids) std::cout << id << '\n';
    } else if (*serve) {
      const service::Service svc(service::load_artifacts(serve_dir));
      service::HttpServer server(svc);
      const int port = server.bind(serve_host, serve_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving " << serve_dir << " on http://" << serve_host << ':' << port << '\n';
      server.listen();
      g_server = nullptr;
    } else if (*run) {
      const auto config = pipeline::load_config(config_path);
      pipeline::run_pipeline(config, [](const pipeline::JobStatus& s) {
        if (s.state == pipeline::StageState::running) {
          std::cerr << "[" << s.stage << "] running\n";
        } else {
          std::cerr << "[" << s.stage << "] " << pipeline::to_string(s.state) << (s.skipped ? " (unchanged)" : "");
          if (s.state == pipeline::StageState::done) std::cerr << " " << s.sha256.substr(0, 12) << " " << s.seconds << "s";
          std::cerr << '\n';
        }
      });
    }
  } catch (const pipeline::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
  return 0;
}
