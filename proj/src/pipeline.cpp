#include "litatlas/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "litatlas/atlas.hpp"
#include "litatlas/chemparse.hpp"
#include "litatlas/corpus.hpp"
#include "litatlas/hashing.hpp"
#include "litatlas/relevance.hpp"
#include "litatlas/textproc.hpp"

namespace litatlas::pipeline {

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

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << data;
  if (!out) throw IoError(path.string(), "write failure");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

// Reads a JSON number that must be a non-negative integer.
std::uint64_t get_u64(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ValidationError(where + "." + key + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

// Files that corpus::ingest would read for `in`, in its order.
std::vector<fs::path> input_files(const fs::path& in) {
  if (!fs::is_directory(in)) return {in};
  std::vector<fs::path> found;
  for (const auto& e : fs::directory_iterator(in)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".xml" || ext == ".jsonl")) found.push_back(e.path());
  }
  std::sort(found.begin(), found.end());
  return found;
}

textproc::StopwordSet stopwords_for(const PipelineConfig& c) {
  return c.stopwords ? textproc::load_stopwords(*c.stopwords) : textproc::default_stopwords();
}

chemparse::Lexicon lexicon_for(const PipelineConfig& c) {
  return c.lexicon ? chemparse::Lexicon::load(*c.lexicon) : chemparse::Lexicon::bundled();
}

std::vector<atlas::LabelRule> rules_for(const PipelineConfig& c) {
  return c.rules ? atlas::load_rules(*c.rules) : atlas::bundled_rules();
}

// Hash of an optional data file, or a fixed tag for the bundled default.
std::string data_hash(const std::optional<fs::path>& p, std::string_view bundled_tag) {
  return p ? sha256_file(*p) : "bundled:" + std::string(bundled_tag);
}

ordered_json tsne_json(const PipelineConfig& c) {
  ordered_json j;
  j["perplexity"] = c.perplexity;
  j["iters"] = c.tsne.iters;
  j["learning_rate"] = c.tsne.learning_rate;
  j["early_exaggeration"] = c.tsne.early_exaggeration;
  j["exaggeration_iters"] = c.tsne.exaggeration_iters;
  j["momentum"] = c.tsne.momentum;
  j["final_momentum"] = c.tsne.final_momentum;
  j["momentum_switch_iter"] = c.tsne.momentum_switch_iter;
  j["seed"] = c.tsne.seed;
  return j;
}

ordered_json lda_json(const PipelineConfig& c) {
  ordered_json j;
  j["topics"] = c.lda.K;
  j["passes"] = c.lda.passes;
  j["alpha"] = c.lda.alpha ? ordered_json(*c.lda.alpha) : ordered_json(nullptr);
  j["beta"] = c.lda.beta;
  j["seed"] = c.lda.seed;
  j["average_last"] = c.lda.average_last;
  j["topic_names"] = c.topic_names;
  auto& anchors = j["topic_anchors"] = ordered_json::array();
  for (const auto& [name, words] : c.topic_anchors) anchors.push_back({{"name", name}, {"keywords", words}});
  return j;
}

embed::Embedding2D embed_texts(const std::vector<std::string>& texts, const std::vector<std::string>& ids,
                               const textproc::StopwordSet& stopwords, const PipelineConfig& c) {
  std::vector<textproc::TokenList> tokens;
  tokens.reserve(texts.size());
  for (const auto& t : texts) tokens.push_back(textproc::tokenize(t, stopwords));
  const auto vocab = textproc::build_vocabulary(tokens);
  std::vector<textproc::SparseVector> vectors;
  vectors.reserve(tokens.size());
  for (const auto& t : tokens) vectors.push_back(textproc::vectorize_tfidf(t, vocab));
  try {
    return embed::embed_vectors(vectors, c.perplexity, c.tsne);
  } catch (const CalibrationError& e) {
    // The message names the row; add the item id.
    std::string what = e.what();
    const auto at = what.find("row ");
    if (at != std::string::npos) {
      std::size_t row = 0;
      std::istringstream(what.substr(at + 4)) >> row;
      if (row < ids.size()) what += " (item " + ids[row] + ")";
    }
    throw CalibrationError(what, e.achieved_perplexity());
  }
}

std::vector<std::string> caption_ids_of(const corpus::Corpus& c) {
  std::vector<std::string> ids;
  for (const auto& d : c.documents())
    for (const auto& cap : d.captions) ids.push_back(cap.caption_id);
  return ids;
}

void check_ids(const std::vector<std::string>& got, const std::vector<std::string>& want, const std::string& what) {
  if (got != want) throw DimensionError(what + " ids do not match the corpus");
}

struct Stage {
  std::string name;
  std::string artifact;
  std::vector<std::string> inputs;  // upstream artifacts whose hashes enter the key
  std::function<ordered_json()> params;
  std::function<void(const fs::path& out)> run;
  bool sidecar = false;
};

}  // namespace

// ---------------------------------------------------------------------------

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what(), e.byte);
  }
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  PipelineConfig c;
  try {
    const auto& in = j.at("inputs");
    if (in.is_string()) {
      c.inputs.push_back(resolve(base_dir, in.get<std::string>()));
    } else {
      for (const auto& p : in) c.inputs.push_back(resolve(base_dir, p.get<std::string>()));
    }
    c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    if (j.contains("stopwords")) c.stopwords = resolve(base_dir, j["stopwords"].get<std::string>());
    if (j.contains("lexicon")) c.lexicon = resolve(base_dir, j["lexicon"].get<std::string>());
    if (j.contains("rules")) c.rules = resolve(base_dir, j["rules"].get<std::string>());
    if (j.contains("classifier")) c.classifier_model = resolve(base_dir, j["classifier"].at("model").get<std::string>());

    const auto& lda = j.at("lda");
    if (!lda.contains("seed")) throw ValidationError("lda.seed is required");
    c.lda.seed = get_u64(lda, "seed", "lda");
    if (lda.contains("topics")) c.lda.K = get_u64(lda, "topics", "lda");
    if (lda.contains("passes")) c.lda.passes = get_u64(lda, "passes", "lda");
    if (lda.contains("alpha") && !lda["alpha"].is_null()) c.lda.alpha = lda["alpha"].get<double>();
    if (lda.contains("beta")) c.lda.beta = lda["beta"].get<double>();
    if (lda.contains("average_last")) c.lda.average_last = get_u64(lda, "average_last", "lda");
    if (lda.contains("topic_names")) c.topic_names = lda["topic_names"].get<std::vector<std::string>>();
    if (lda.contains("topic_anchors"))
      for (const auto& a : lda["topic_anchors"])
        c.topic_anchors.emplace_back(a.at("name").get<std::string>(), a.at("keywords").get<std::vector<std::string>>());

    const auto& ts = j.at("tsne");
    if (!ts.contains("seed")) throw ValidationError("tsne.seed is required");
    c.tsne.seed = get_u64(ts, "seed", "tsne");
    if (ts.contains("perplexity")) c.perplexity = ts["perplexity"].get<double>();
    if (ts.contains("iters")) c.tsne.iters = get_u64(ts, "iters", "tsne");
    if (ts.contains("learning_rate")) c.tsne.learning_rate = ts["learning_rate"].get<double>();
    if (ts.contains("early_exaggeration")) c.tsne.early_exaggeration = ts["early_exaggeration"].get<double>();
    if (ts.contains("exaggeration_iters")) c.tsne.exaggeration_iters = get_u64(ts, "exaggeration_iters", "tsne");
    if (ts.contains("momentum")) c.tsne.momentum = ts["momentum"].get<double>();
    if (ts.contains("final_momentum")) c.tsne.final_momentum = ts["final_momentum"].get<double>();
    if (ts.contains("momentum_switch_iter"))
      c.tsne.momentum_switch_iter = get_u64(ts, "momentum_switch_iter", "tsne");

    if (j.contains("chem") && j["chem"].contains("min_species_docs"))
      c.min_species_docs = get_u64(j["chem"], "min_species_docs", "chem");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ValidationError(e.what());
  }
  return parse_config(text, path.parent_path());
}

void validate_config(const PipelineConfig& c) {
  if (c.inputs.empty()) throw ValidationError("config lists no inputs");
  for (const auto& p : c.inputs)
    if (!fs::exists(p)) throw ValidationError("input does not exist: " + p.string());
  if (c.output_dir.empty()) throw ValidationError("output_dir is empty");
  if (fs::exists(c.output_dir) && !fs::is_directory(c.output_dir))
    throw ValidationError("output_dir is not a directory: " + c.output_dir.string());
  const auto check_file = [](const std::optional<fs::path>& p, const char* what) {
    if (p && !fs::is_regular_file(*p)) throw ValidationError(std::string(what) + " file does not exist: " + p->string());
  };
  check_file(c.stopwords, "stopwords");
  check_file(c.lexicon, "lexicon");
  check_file(c.rules, "rules");
  check_file(c.classifier_model, "classifier model");

  if (c.lda.K == 0) throw ValidationError("lda.topics must be at least 1");
  if (c.lda.passes == 0) throw ValidationError("lda.passes must be at least 1");
  if (c.lda.beta <= 0.0 || (c.lda.alpha && *c.lda.alpha <= 0.0))
    throw ValidationError("lda priors must be positive");
  if (c.topic_names.size() > c.lda.K) throw ValidationError("more topic_names than topics");
  if (!(c.perplexity > 0.0)) throw ValidationError("tsne.perplexity must be positive");
  if (c.tsne.iters == 0) throw ValidationError("tsne.iters must be at least 1");
  if (!(c.tsne.learning_rate > 0.0)) throw ValidationError("tsne.learning_rate must be positive");
  if (c.min_species_docs == 0) throw ValidationError("chem.min_species_docs must be at least 1");

  // Data files must parse, not merely exist.
  try {
    stopwords_for(c);
    lexicon_for(c);
    rules_for(c);
    if (c.classifier_model) {
      const auto m = relevance::load_model(*c.classifier_model);
      if (!m.vocab) throw ValidationError("classifier model has no vocabulary");
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
}

// ---------------------------------------------------------------------------

std::string_view to_string(StageState s) {
  switch (s) {
    case StageState::pending:
      return "pending";
    case StageState::running:
      return "running";
    case StageState::done:
      return "done";
    case StageState::failed:
      return "failed";
  }
  return "pending";
}

std::map<std::string, std::string> Manifest::artifacts() const {
  std::map<std::string, std::string> out;
  for (const auto& s : stages)
    if (s.state == StageState::done) out[s.artifact] = s.sha256;
  return out;
}

const JobStatus* Manifest::stage(std::string_view name) const {
  for (const auto& s : stages)
    if (s.stage == name) return &s;
  return nullptr;
}

std::string manifest_to_json(const Manifest& m) {
  ordered_json j;
  auto& stages = j["stages"] = ordered_json::array();
  for (const auto& s : m.stages) {
    ordered_json e;
    e["stage"] = s.stage;
    e["state"] = to_string(s.state);
    e["skipped"] = s.skipped;
    e["seconds"] = s.seconds;
    e["input_key"] = s.input_key;
    e["artifact"] = s.artifact;
    e["sha256"] = s.sha256;
    if (!s.error.empty()) e["error"] = s.error;
    stages.push_back(std::move(e));
  }
  j["artifacts"] = ordered_json::object();
  for (const auto& [name, hash] : m.artifacts()) j["artifacts"][name] = hash;
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    Manifest m;
    for (const auto& e : j.at("stages")) {
      JobStatus s;
      s.stage = e.at("stage").get<std::string>();
      const auto state = e.at("state").get<std::string>();
      if (state == "pending") s.state = StageState::pending;
      else if (state == "running") s.state = StageState::running;
      else if (state == "done") s.state = StageState::done;
      else if (state == "failed") s.state = StageState::failed;
      else throw SchemaError("unknown stage state " + state);
      s.skipped = e.value("skipped", false);
      s.seconds = e.value("seconds", 0.0);
      s.input_key = e.value("input_key", "");
      s.artifact = e.value("artifact", "");
      s.sha256 = e.value("sha256", "");
      s.error = e.value("error", "");
      m.stages.push_back(std::move(s));
    }
    return m;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest: ") + e.what());
  }
}

Manifest read_manifest(const fs::path& path) { return manifest_from_json(read_file(path)); }

// ---------------------------------------------------------------------------

Manifest run_pipeline(const PipelineConfig& c, const StageCallback& on_stage) {
  validate_config(c);
  fs::create_directories(c.output_dir);
  const auto out = [&](std::string_view name) { return c.output_dir / fs::path(name); };
  const auto manifest_path = out("manifest.json");

  Manifest previous;
  if (fs::exists(manifest_path)) {
    try {
      previous = read_manifest(manifest_path);
    } catch (const Error&) {
      previous = {};  // unreadable manifest: rerun everything
    }
  }

  const auto stopwords_hash = data_hash(c.stopwords, "stopwords");

  // Loaders shared by several stages read the artifacts back from disk, so a
  // skipped stage and a fresh one feed identical data downstream.
  const auto load_corpus = [&] { return corpus::load_corpus(out("corpus.jsonl")); };

  std::vector<Stage> stages;

  stages.push_back({"ingest", "corpus.jsonl", {},
                    [&] {
                      ordered_json p;
                      auto& files = p["inputs"] = ordered_json::array();
                      for (const auto& in : c.inputs)
                        for (const auto& f : input_files(in))
                          files.push_back({{"path", f.filename().string()}, {"sha256", sha256_file(f)}});
                      p["classifier"] = c.classifier_model ? sha256_file(*c.classifier_model) : "";
                      p["stopwords"] = c.classifier_model ? stopwords_hash : "";
                      return p;
                    },
                    [&](const fs::path& dst) {
                      auto corpus = corpus::ingest(c.inputs);
                      if (c.classifier_model) {
                        const auto model = relevance::load_model(*c.classifier_model);
                        const auto sw = stopwords_for(c);
                        std::vector<corpus::Document> kept;
                        for (auto d : corpus.documents()) {
                          const auto x = textproc::vectorize_tfidf(textproc::tokenize(d.abstract, sw), *model.vocab);
                          d.relevant = relevance::classify(model, x) == 1;
                          if (*d.relevant) kept.push_back(std::move(d));
                        }
                        corpus = corpus::Corpus(std::move(kept), corpus.source_manifest());
                      }
                      corpus::save_corpus(corpus, dst);
                    }});

  stages.push_back({"lda", "lda_model.json", {"corpus.jsonl"},
                    [&] {
                      auto p = lda_json(c);
                      p["stopwords"] = stopwords_hash;
                      return p;
                    },
                    [&](const fs::path& dst) {
                      const auto corpus = load_corpus();
                      const auto sw = stopwords_for(c);
                      std::vector<textproc::TokenList> docs;
                      for (const auto& d : corpus.documents()) docs.push_back(topics::document_tokens(d, sw));
                      auto model = topics::fit_lda(docs, c.lda);
                      if (!c.topic_names.empty()) {
                        model.topic_names = c.topic_names;
                        model.topic_names.resize(model.K);
                      } else if (!c.topic_anchors.empty()) {
                        model.topic_names = topics::name_topics_by_anchors(model, c.topic_anchors);
                      }
                      topics::save_model(model, dst);
                    }});

  stages.push_back({"embed_abstracts", "embedding_abstracts.csv", {"corpus.jsonl"},
                    [&] {
                      auto p = tsne_json(c);
                      p["stopwords"] = stopwords_hash;
                      return p;
                    },
                    [&](const fs::path& dst) {
                      const auto corpus = load_corpus();
                      std::vector<std::string> ids, texts;
                      for (const auto& d : corpus.documents()) {
                        ids.push_back(d.doc_id);
                        texts.push_back(d.abstract);
                      }
                      const auto e = embed_texts(texts, ids, stopwords_for(c), c);
                      embed::write_embedding(e, ids, dst, embed::sidecar_path(dst));
                    },
                    true});

  stages.push_back({"embed_captions", "embedding_captions.csv", {"corpus.jsonl"},
                    [&] {
                      auto p = tsne_json(c);
                      p["stopwords"] = stopwords_hash;
                      return p;
                    },
                    [&](const fs::path& dst) {
                      const auto corpus = load_corpus();
                      std::vector<std::string> ids, texts;
                      for (const auto& d : corpus.documents())
                        for (const auto& cap : d.captions) {
                          ids.push_back(cap.caption_id);
                          texts.push_back(cap.text);
                        }
                      const auto e = embed_texts(texts, ids, stopwords_for(c), c);
                      embed::write_embedding(e, ids, dst, embed::sidecar_path(dst));
                    },
                    true});

  stages.push_back({"chem", "element_markers.csv", {"corpus.jsonl"},
                    [&] {
                      ordered_json p;
                      p["lexicon"] = data_hash(c.lexicon, "lexicon");
                      p["min_species_docs"] = c.min_species_docs;
                      return p;
                    },
                    [&](const fs::path& dst) {
                      const auto corpus = load_corpus();
                      const auto lexicon = lexicon_for(c);
                      const auto species = chemparse::extract_corpus_species(corpus, lexicon);
                      chemparse::write_markers_csv(
                          chemparse::element_markers(corpus, species, lexicon.elements(), c.min_species_docs), dst);
                    }});

  stages.push_back({"caption_labels", "caption_labels.json", {"corpus.jsonl"},
                    [&] {
                      ordered_json p;
                      p["rules"] = data_hash(c.rules, "rules");
                      return p;
                    },
                    [&](const fs::path& dst) {
                      write_file(dst, atlas::caption_labels_to_json(atlas::label_captions(load_corpus(), rules_for(c))) + "\n");
                    }});

  stages.push_back({"map_lda", "map_lda.json", {"corpus.jsonl", "lda_model.json", "embedding_abstracts.csv"},
                    [&] { return ordered_json::object(); },
                    [&](const fs::path& dst) {
                      const auto corpus = load_corpus();
                      const auto model = topics::load_model(out("lda_model.json"));
                      const auto emb = embed::read_embedding_csv(out("embedding_abstracts.csv"));
                      std::vector<std::string> ids;
                      for (const auto& d : corpus.documents()) ids.push_back(d.doc_id);
                      check_ids(emb.ids, ids, "abstract embedding");
                      atlas::export_map(atlas::build_lda_map(emb.ids, emb.coords, model), dst);
                    }});

  stages.push_back({"map_ccp", "map_ccp.json", {"corpus.jsonl", "embedding_captions.csv", "caption_labels.json"},
                    [&] { return ordered_json::object(); },
                    [&](const fs::path& dst) {
                      const auto corpus = load_corpus();
                      const auto labels = atlas::caption_labels_from_json(read_file(out("caption_labels.json")));
                      const auto emb = embed::read_embedding_csv(out("embedding_captions.csv"));
                      check_ids(emb.ids, caption_ids_of(corpus), "caption embedding");
                      atlas::export_map(atlas::build_ccp_map(emb.ids, emb.coords, labels), dst);
                    }});

  Manifest manifest;
  for (const auto& s : stages) manifest.stages.push_back({s.name, StageState::pending, false, 0.0, "", s.artifact, "", ""});
  const auto save = [&] { write_file(manifest_path, manifest_to_json(manifest)); };
  std::map<std::string, std::string> hashes;

  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    auto& status = manifest.stages[i];
    const auto started = std::chrono::steady_clock::now();
    status.state = StageState::running;
    try {
      ordered_json key;
      key["stage"] = s.name;
      key["params"] = s.params();
      for (const auto& in : s.inputs) key["inputs"][in] = hashes.at(in);
      status.input_key = sha256_hex(key.dump());

      const auto dst = out(s.artifact);
      const auto* prev = previous.stage(s.name);
      const bool reusable = prev && prev->state == StageState::done && prev->input_key == status.input_key &&
                            fs::is_regular_file(dst) && (!s.sidecar || fs::is_regular_file(embed::sidecar_path(dst))) &&
                            sha256_file(dst) == prev->sha256;
      if (reusable) {
        status.skipped = true;
      } else {
        if (on_stage) on_stage(status);
        s.run(dst);
      }
      status.sha256 = sha256_file(dst);
      hashes[s.artifact] = status.sha256;
      status.state = StageState::done;
    } catch (const Error& e) {
      status.state = StageState::failed;
      status.error = e.what();
    } catch (const std::exception& e) {
      status.state = StageState::failed;
      status.error = e.what();
    }
    status.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    save();
    if (on_stage) on_stage(status);
    if (status.state == StageState::failed) throw StageError(s.name, status.error);
  }
  return manifest;
}

}  // namespace litatlas::pipeline
