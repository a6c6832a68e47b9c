#pragma once

// Tokenization, corpus dictionary, TF-IDF vectors and cosine distances.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace litatlas::textproc {

using StopwordSet = std::unordered_set<std::string>;
/// Lowercase tokens; never empty, letterless, or stopwords.
using TokenList = std::vector<std::string>;

/// Maximal runs of letters, digits, '+' and '-', lowercased. Tokens without
/// a letter and stopwords are dropped. Non-ASCII UTF-8 bytes count as letters.
TokenList tokenize(std::string_view text, const StopwordSet& stopwords);

/// One lowercase token per line; '#' starts a comment.
StopwordSet parse_stopwords(std::string_view text);
StopwordSet load_stopwords(const std::filesystem::path& path);
/// The bundled English list.
const StopwordSet& default_stopwords();

class Vocabulary {
 public:
  Vocabulary() = default;
  /// `terms` must be unique; `doc_freq[i]` counts documents containing terms[i].
  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq, std::size_t corpus_size);

  std::size_t size() const noexcept { return terms_.size(); }
  std::size_t corpus_size() const noexcept { return corpus_size_; }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::vector<std::size_t>& doc_freq() const noexcept { return doc_freq_; }
  const std::string& term(std::size_t id) const { return terms_[id]; }

  /// Dimension id, or -1 for out-of-vocabulary tokens.
  long index_of(std::string_view token) const;

  /// ln(N / doc_freq).
  double idf(std::size_t id) const;

  bool operator==(const Vocabulary& o) const {
    return terms_ == o.terms_ && doc_freq_ == o.doc_freq_ && corpus_size_ == o.corpus_size_;
  }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::size_t corpus_size_ = 0;
  std::unordered_map<std::string, std::size_t, Hash, std::equal_to<>> index_;
};

/// Terms sorted lexicographically; keeps terms present in >= min_df documents.
Vocabulary build_vocabulary(const std::vector<TokenList>& docs, std::size_t min_df = 1);

/// Maps tokens to dimension ids, dropping out-of-vocabulary tokens.
std::vector<int> to_ids(const TokenList& doc, const Vocabulary& vocab);

struct SparseEntry {
  std::size_t dim;
  double weight;
  bool operator==(const SparseEntry&) const = default;
};

class SparseVector {
 public:
  SparseVector() = default;
  /// Entries must have strictly increasing ids below `dim` and nonzero weights.
  SparseVector(std::vector<SparseEntry> entries, std::size_t dim);

  const std::vector<SparseEntry>& entries() const noexcept { return entries_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  double norm() const noexcept;

  bool operator==(const SparseVector&) const = default;

 private:
  std::vector<SparseEntry> entries_;
  std::size_t dim_ = 0;
};

enum class TfMode { binary, count };

/// weight(t) = tf(t, doc) * ln(N / doc_freq[t]); zero weights are omitted.
SparseVector vectorize_tfidf(const TokenList& doc, const Vocabulary& vocab, TfMode mode = TfMode::binary);

double dot(const SparseVector& a, const SparseVector& b);

/// dot / (|a||b|), clamped to [0, 1]; 0 when either norm is 0. Throws DimensionError.
double cosine_similarity(const SparseVector& a, const SparseVector& b);

/// Dense symmetric n x n matrix stored row-major.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return d_[i * n_ + j]; }
  const double* row(std::size_t i) const { return d_.data() + i * n_; }
  const std::vector<double>& data() const noexcept { return d_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

/// D[i][j] = 1 - cosine_similarity(i, j). Throws ValidationError for n < 2.
DistanceMatrix pairwise_cosine_distance(const std::vector<SparseVector>& vectors);

/// Dense CSV, header "id,<id_0>,...", then one row per item.
void write_distance_csv(const DistanceMatrix& d, const std::vector<std::string>& ids,
                        const std::filesystem::path& path);

}  // namespace litatlas::textproc
