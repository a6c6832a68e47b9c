#include "litatlas/textproc.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "csv.hpp"
#include "embedded_data.hpp"
#include "litatlas/error.hpp"

namespace litatlas::textproc {

namespace {

bool is_ascii_letter(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_token_char(unsigned char c) {
  return is_ascii_letter(c) || is_digit(c) || c == '+' || c == '-' || c >= 0x80;
}
bool is_letter(unsigned char c) { return is_ascii_letter(c) || c >= 0x80; }

}  // namespace

TokenList tokenize(std::string_view text, const StopwordSet& stopwords) {
  TokenList tokens;
  std::size_t i = 0;
  std::string current;
  while (i < text.size()) {
    while (i < text.size() && !is_token_char(static_cast<unsigned char>(text[i]))) ++i;
    current.clear();
    bool has_letter = false;
    while (i < text.size() && is_token_char(static_cast<unsigned char>(text[i]))) {
      const auto c = static_cast<unsigned char>(text[i]);
      has_letter = has_letter || is_letter(c);
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
      ++i;
    }
    if (current.empty() || !has_letter) continue;
    if (stopwords.contains(current)) continue;
    tokens.push_back(current);
  }
  return tokens;
}

StopwordSet parse_stopwords(std::string_view text) {
  StopwordSet out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    if (!line.empty()) {
      std::string w(line);
      std::transform(w.begin(), w.end(), w.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      out.insert(std::move(w));
    }
    start = end + 1;
  }
  return out;
}

StopwordSet load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open stopword file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_stopwords(ss.str());
}

const StopwordSet& default_stopwords() {
  static const StopwordSet kDefault = parse_stopwords(embedded::stopwords());
  return kDefault;
}

// ---------------------------------------------------------------------------

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
                       std::size_t corpus_size)
    : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), corpus_size_(corpus_size) {
  if (terms_.size() != doc_freq_.size()) throw DimensionError("vocabulary terms and doc_freq differ in length");
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (doc_freq_[i] < 1 || doc_freq_[i] > corpus_size_)
      throw ValidationError("doc_freq of \"" + terms_[i] + "\" outside 1..N");
    if (!index_.emplace(terms_[i], i).second) throw ValidationError("duplicate vocabulary term \"" + terms_[i] + "\"");
  }
}

long Vocabulary::index_of(std::string_view token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

double Vocabulary::idf(std::size_t id) const {
  return std::log(static_cast<double>(corpus_size_) / static_cast<double>(doc_freq_[id]));
}

Vocabulary build_vocabulary(const std::vector<TokenList>& docs, std::size_t min_df) {
  if (docs.empty()) throw ValidationError("cannot build a vocabulary from zero documents");
  std::map<std::string, std::size_t, std::less<>> df;
  std::vector<std::string_view> seen;
  for (const auto& doc : docs) {
    seen.assign(doc.begin(), doc.end());
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto t : seen) {
      auto it = df.find(t);
      if (it == df.end()) df.emplace(std::string(t), 1);
      else ++it->second;
    }
  }
  std::vector<std::string> terms;
  std::vector<std::size_t> freq;
  for (auto& [term, count] : df) {
    if (count < std::max<std::size_t>(min_df, 1)) continue;
    terms.push_back(term);
    freq.push_back(count);
  }
  return Vocabulary(std::move(terms), std::move(freq), docs.size());
}

std::vector<int> to_ids(const TokenList& doc, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(doc.size());
  for (const auto& t : doc)
    if (const auto id = vocab.index_of(t); id >= 0) ids.push_back(static_cast<int>(id));
  return ids;
}

// ---------------------------------------------------------------------------

SparseVector::SparseVector(std::vector<SparseEntry> entries, std::size_t dim)
    : entries_(std::move(entries)), dim_(dim) {
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (entries_[k].dim >= dim_) throw DimensionError("sparse entry id out of range");
    if (k > 0 && entries_[k].dim <= entries_[k - 1].dim) throw ValidationError("sparse entry ids must increase");
    if (entries_[k].weight == 0.0) throw ValidationError("explicit zero weight in sparse vector");
  }
}

double SparseVector::norm() const noexcept {
  double s = 0.0;
  for (const auto& e : entries_) s += e.weight * e.weight;
  return std::sqrt(s);
}

SparseVector vectorize_tfidf(const TokenList& doc, const Vocabulary& vocab, TfMode mode) {
  std::vector<std::pair<std::size_t, std::size_t>> counts;  // (id, tf)
  counts.reserve(doc.size());
  for (const auto& t : doc) {
    const auto id = vocab.index_of(t);
    if (id < 0) continue;
    counts.emplace_back(static_cast<std::size_t>(id), 1);
  }
  std::sort(counts.begin(), counts.end());
  std::vector<SparseEntry> entries;
  for (std::size_t k = 0; k < counts.size();) {
    const auto id = counts[k].first;
    std::size_t tf = 0;
    while (k < counts.size() && counts[k].first == id) {
      ++tf;
      ++k;
    }
    const double tf_weight = mode == TfMode::binary ? 1.0 : static_cast<double>(tf);
    const double w = tf_weight * vocab.idf(id);
    if (w != 0.0) entries.push_back({id, w});
  }
  return SparseVector(std::move(entries), vocab.size());
}

double dot(const SparseVector& a, const SparseVector& b) {
  if (a.dim() != b.dim()) throw DimensionError("sparse vectors differ in dimension");
  const auto& ea = a.entries();
  const auto& eb = b.entries();
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].dim == eb[j].dim) {
      s += ea[i].weight * eb[j].weight;
      ++i;
      ++j;
    } else if (ea[i].dim < eb[j].dim) {
      ++i;
    } else {
      ++j;
    }
  }
  return s;
}

double cosine_similarity(const SparseVector& a, const SparseVector& b) {
  const double d = dot(a, b);
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(d / (na * nb), 0.0, 1.0);
}

DistanceMatrix pairwise_cosine_distance(const std::vector<SparseVector>& vectors) {
  const auto n = vectors.size();
  if (n < 2) throw ValidationError("pairwise distance needs at least two vectors");
  for (const auto& v : vectors)
    if (v.dim() != vectors.front().dim()) throw DimensionError("vectors differ in dimension");
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = vectors[i].norm();
  DistanceMatrix d(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double sim = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0)
        sim = std::clamp(dot(vectors[i], vectors[j]) / (norms[i] * norms[j]), 0.0, 1.0);
      d(i, j) = d(j, i) = 1.0 - sim;
    }
  }
  return d;
}

void write_distance_csv(const DistanceMatrix& d, const std::vector<std::string>& ids,
                        const std::filesystem::path& path) {
  if (ids.size() != d.size()) throw DimensionError("id count does not match distance matrix size");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << "id";
  for (const auto& id : ids) out << ',' << csv::field(id);
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << csv::field(ids[i]);
    for (std::size_t j = 0; j < d.size(); ++j) out << ',' << csv::format_double(d(i, j));
    out << '\n';
  }
  if (!out) throw IoError(path.string(), "write failure");
}

}  // namespace litatlas::textproc
