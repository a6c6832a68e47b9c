#pragma once

// In-memory artifacts over the first `n` documents of the bundled mini-corpus.

#include <string>
#include <vector>

#include "litatlas/atlas.hpp"
#include "litatlas/chemparse.hpp"
#include "litatlas/corpus.hpp"
#include "litatlas/textproc.hpp"
#include "litatlas/topics.hpp"

namespace fixture {

struct MiniArtifacts {
  litatlas::corpus::Corpus corpus;
  litatlas::topics::TopicModel model;
  litatlas::chemparse::DocumentElementMatrix markers;
  litatlas::atlas::CaptionLabels labels;
};

inline MiniArtifacts mini_artifacts(std::size_t n, std::size_t passes = 100) {
  using namespace litatlas;
  const auto full = corpus::load_corpus(std::string(LITATLAS_SOURCE_DIR) + "/data/minicorpus/corpus.jsonl");
  std::vector<corpus::Document> docs(full.documents().begin(),
                                     full.documents().begin() + static_cast<long>(std::min(n, full.size())));
  MiniArtifacts a;
  a.corpus = corpus::Corpus(std::move(docs));
  std::vector<textproc::TokenList> toks;
  for (const auto& d : a.corpus.documents()) toks.push_back(topics::document_tokens(d, textproc::default_stopwords()));
  topics::LdaOptions o;
  o.K = 6;
  o.passes = passes;
  o.seed = 7;
  a.model = topics::fit_lda(toks, o);
  a.model.topic_names = topics::name_topics_by_anchors(
      a.model, {{"bioactive", {"bioactive", "apatite", "sbf", "fluoride", "hydroxyapatite"}},
                {"rare-earth", {"upconversion", "luminescence", "emission", "erbium"}},
                {"conducting-films", {"films", "ito", "sputtering", "transparent"}},
                {"glass-ceramics", {"crystallization", "nucleation", "glass-ceramics"}},
                {"mechanical", {"hardness", "fracture", "strength", "indentation"}},
                {"nuclear", {"waste", "nuclear", "americium", "leaching"}}});
  a.markers = chemparse::element_markers(a.corpus, chemparse::extract_corpus_species(a.corpus));
  a.labels = atlas::label_captions(a.corpus, atlas::bundled_rules());
  return a;
}

}  // namespace fixture
