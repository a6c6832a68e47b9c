#pragma once

// LDA by collapsed Gibbs sampling, topic coherence, and topic-based corpus
// filtering.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "litatlas/corpus.hpp"
#include "litatlas/textproc.hpp"

namespace litatlas::topics {

struct LdaOptions {
  std::size_t K = 15;
  std::size_t passes = 500;
  /// Symmetric document-topic prior; 50/K when unset.
  std::optional<double> alpha;
  double beta = 0.01;
  std::uint64_t seed = 0;
  /// Average phi/theta over the last `average_last` sweeps instead of taking
  /// the final sample. 0 disables averaging.
  std::size_t average_last = 0;
  /// Recount the tables after every sweep and throw if they disagree.
  bool check_counts = false;
};

/// Sampler state after the final sweep.
struct GibbsCounts {
  std::vector<std::vector<int>> docs;  // word ids per document
  std::vector<std::vector<int>> z;     // topic per token
  std::vector<int> n_kw;               // K x V, row-major
  std::vector<int> n_dk;               // D x K, row-major
  std::vector<int> n_k;
  std::size_t total_tokens = 0;

  bool empty() const noexcept { return docs.empty(); }
};

struct TopicModel {
  std::size_t K = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::size_t passes = 0;
  std::vector<std::string> vocab;
  std::vector<std::vector<double>> phi;    // K x V
  std::vector<std::vector<double>> theta;  // D x K
  std::vector<int> assignments;            // argmax of each theta row
  /// Human-assigned names by topic id; empty entries fall back to the id.
  std::vector<std::string> topic_names;
  /// Present after fitting; not persisted.
  GibbsCounts counts;

  std::size_t vocab_size() const noexcept { return vocab.size(); }
  std::size_t num_docs() const noexcept { return theta.size(); }
  /// topic_names[k] when set, otherwise the decimal id.
  std::string topic_name(std::size_t k) const;
  /// Topic id for a name or a decimal id.
  std::optional<std::size_t> find_topic(std::string_view name_or_id) const;

  bool operator==(const TopicModel& o) const {
    return K == o.K && alpha == o.alpha && beta == o.beta && seed == o.seed && passes == o.passes &&
           vocab == o.vocab && phi == o.phi && theta == o.theta && assignments == o.assignments &&
           topic_names == o.topic_names;
  }
};

/// Called with pass 0 on the initial assignments, then after every sweep
/// with the 1-based pass number.
using PassCallback = std::function<void(std::size_t pass, const GibbsCounts& counts)>;

/// Fits over `docs` with a vocabulary built from them (min_df = 1).
TopicModel fit_lda(const std::vector<textproc::TokenList>& docs, const LdaOptions& options,
                   const PassCallback& on_pass = {});

/// Fits over pre-mapped word ids. `doc_keys` seed each document's initial
/// assignments; they default to the document index, so permuting documents and
/// keys together permutes the initial state.
TopicModel fit_lda(const std::vector<std::vector<int>>& docs, std::vector<std::string> vocab,
                   const LdaOptions& options, const PassCallback& on_pass = {},
                   std::span<const std::uint64_t> doc_keys = {});

/// Recomputes every table from the assignments; throws Error on any mismatch.
void verify_counts(const GibbsCounts& counts, std::size_t K, std::size_t V);

/// Highest-probability words of `topic`, ties by vocabulary index.
std::vector<std::pair<std::string, double>> top_words(const TopicModel& model, std::size_t topic, std::size_t n);

/// argmax of theta[doc_index]; lowest index wins ties.
std::size_t assign_topic(const TopicModel& model, std::size_t doc_index);

struct CoherenceReport {
  std::size_t K = 0;
  std::vector<double> per_topic;
  double mean = 0.0;
};

/// Document co-occurrence coherence over each topic's top_n words w_1..w_n
/// (by rank): sum over i < j of ln((D(w_i, w_j) + 1) / D(w_j)).
CoherenceReport coherence(const TopicModel& model, const std::vector<textproc::TokenList>& docs,
                          std::size_t top_n = 10);

/// One fit per K with the same seed; returns (K, mean coherence).
std::vector<std::pair<std::size_t, double>> coherence_scan(const std::vector<textproc::TokenList>& docs,
                                                           const std::vector<std::size_t>& K_values,
                                                           const LdaOptions& base, std::size_t top_n = 10);

/// Drops documents whose assigned topic is in `drop`, keeping order.
corpus::Corpus filter_by_topics(const corpus::Corpus& corpus, const TopicModel& model,
                                const std::set<std::size_t>& drop);

struct SubtopicFit {
  TopicModel model;
  std::vector<std::size_t> doc_indices;  // rows of the parent corpus
};

/// Refits on the documents assigned to `topic` with a vocabulary rebuilt from
/// that subset. Throws ValidationError when fewer than K documents qualify.
SubtopicFit refit_subtopics(const std::vector<textproc::TokenList>& docs, const TopicModel& model,
                            std::size_t topic, const LdaOptions& options);

/// Names topics from keyword anchors: each anchor, in order, takes the
/// still-unnamed topic with the most phi mass on its keywords.
std::vector<std::string> name_topics_by_anchors(
    const TopicModel& model, const std::vector<std::pair<std::string, std::vector<std::string>>>& anchors);

/// Tokens LDA sees for a document: its abstract.
textproc::TokenList document_tokens(const corpus::Document& doc, const textproc::StopwordSet& stopwords);

void save_model(const TopicModel& model, const std::filesystem::path& path);
TopicModel load_model(const std::filesystem::path& path);
std::string model_to_json(const TopicModel& model);
TopicModel model_from_json(std::string_view text);

}  // namespace litatlas::topics
