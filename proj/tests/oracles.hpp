#pragma once

// Independent reference implementations and fixtures shared by the unit tests
// and the acceptance binary. Nothing here calls the code path it checks.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "litatlas/atlas.hpp"
#include "litatlas/chemparse.hpp"
#include "litatlas/corpus.hpp"
#include "litatlas/rng.hpp"
#include "litatlas/textproc.hpp"
#include "litatlas/topics.hpp"

#include <unistd.h>

namespace oracle {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("litatlas-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

// ---------------------------------------------------------------------------
// TF-IDF: two passes over plain token lists, binary tf, natural-log idf.

struct NaiveTfidf {
  std::vector<std::string> terms;                   // sorted
  std::vector<std::map<std::string, double>> rows;  // nonzero weights
};

inline NaiveTfidf naive_tfidf(const std::vector<std::vector<std::string>>& docs) {
  NaiveTfidf out;
  std::map<std::string, std::size_t> df;
  for (const auto& d : docs) {
    const std::set<std::string> uniq(d.begin(), d.end());
    for (const auto& t : uniq) ++df[t];
  }
  for (const auto& [t, n] : df) out.terms.push_back(t);
  const double N = static_cast<double>(docs.size());
  for (const auto& d : docs) {
    std::map<std::string, double> row;
    for (const auto& t : d) {
      const double w = std::log(N / static_cast<double>(df[t]));
      if (w != 0.0) row[t] = w;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Filter expressions: a generator with its own tree, and a brute-force
// per-document evaluator over the raw artifacts.

struct GenExpr {
  enum Kind { all, topic, element, phrase, caption, and_, or_, not_ } kind = all;
  std::string value;
  std::vector<GenExpr> kids;
};

struct Inventory {
  std::vector<std::string> topics;    // names or decimal ids
  std::vector<std::string> elements;  // symbols present in the marker matrix
  std::vector<std::string> phrases;
  std::vector<std::string> labels;
};

inline std::string quote(const std::string& v) {
  std::string out = "\"";
  for (const char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

inline bool bare_ok(const std::string& v) {
  if (v.empty()) return false;
  for (const char c : v)
    if (c == ' ' || c == '(' || c == ')' || c == '"' || c == '\\' || c == '\t') return false;
  return true;
}

class ExprGenerator {
 public:
  ExprGenerator(Inventory inv, std::uint64_t seed) : inv_(std::move(inv)), rng_(seed) {}

  GenExpr expr(int depth = 3) {
    const auto roll = rng_.below(depth <= 0 ? 5 : 8);
    GenExpr e;
    switch (roll) {
      case 0:
        e.kind = GenExpr::topic;
        e.value = pick(inv_.topics);
        break;
      case 1:
        e.kind = GenExpr::element;
        e.value = pick(inv_.elements);
        break;
      case 2:
        e.kind = GenExpr::phrase;
        e.value = pick(inv_.phrases);
        break;
      case 3:
        e.kind = GenExpr::caption;
        e.value = pick(inv_.labels);
        break;
      case 4:
        if (rng_.below(4) == 0) {
          e.kind = GenExpr::all;
        } else {
          e.kind = GenExpr::element;
          e.value = pick(inv_.elements);
        }
        break;
      case 5:
        e.kind = GenExpr::not_;
        e.kids.push_back(expr(depth - 1));
        break;
      default: {
        e.kind = roll == 6 ? GenExpr::and_ : GenExpr::or_;
        const auto n = 2 + rng_.below(2);
        for (std::uint64_t i = 0; i < n; ++i) e.kids.push_back(expr(depth - 1));
      }
    }
    return e;
  }

  /// Fully parenthesized text with random spacing and quoting.
  std::string render(const GenExpr& e) {
    const auto sp = [&] { return std::string(1 + rng_.below(2), ' '); };
    const auto name = [&](const std::string& v) { return bare_ok(v) && rng_.below(2) ? v : quote(v); };
    switch (e.kind) {
      case GenExpr::all:
        return "*";
      case GenExpr::topic:
        return "topic:" + name(e.value);
      case GenExpr::element:
        return "element:" + name(e.value);
      case GenExpr::phrase:
        return "phrase:" + quote(e.value);
      case GenExpr::caption:
        return "caption:" + name(e.value);
      case GenExpr::not_:
        return "NOT" + sp() + "(" + render(e.kids[0]) + ")";
      default: {
        std::string out = "(";
        for (std::size_t i = 0; i < e.kids.size(); ++i) {
          if (i) out += sp() + (e.kind == GenExpr::and_ ? "AND" : "OR") + sp();
          out += render(e.kids[i]);
        }
        return out + ")";
      }
    }
  }

 private:
  const std::string& pick(const std::vector<std::string>& v) { return v[rng_.below(v.size())]; }

  Inventory inv_;
  litatlas::Rng rng_;
};

inline std::string lower(std::string s) {
  for (auto& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

/// Evaluates one document directly from the raw artifacts.
class BruteForce {
 public:
  BruteForce(const litatlas::corpus::Corpus& c, const litatlas::topics::TopicModel& m,
             const litatlas::chemparse::DocumentElementMatrix& markers, const litatlas::atlas::CaptionLabels& labels)
      : c_(c), m_(m), markers_(markers), labels_(labels) {}

  bool matches(const GenExpr& e, std::size_t d) const {
    switch (e.kind) {
      case GenExpr::all:
        return true;
      case GenExpr::topic:
        return argmax(d) == topic_id(e.value);
      case GenExpr::element: {
        std::size_t row = markers_.doc_ids.size(), col = markers_.elements.size();
        for (std::size_t r = 0; r < markers_.doc_ids.size(); ++r)
          if (markers_.doc_ids[r] == c_[d].doc_id) row = r;
        for (std::size_t k = 0; k < markers_.elements.size(); ++k)
          if (markers_.elements[k] == e.value) col = k;
        return markers_.rows.at(row).at(col) == 1;
      }
      case GenExpr::phrase:
        return lower(c_[d].abstract).find(lower(e.value)) != std::string::npos;
      case GenExpr::caption:
        for (const auto& cap : c_[d].captions)
          for (std::size_t i = 0; i < labels_.caption_ids.size(); ++i)
            if (labels_.caption_ids[i] == cap.caption_id && labels_.labels[i] && *labels_.labels[i] == e.value)
              return true;
        return false;
      case GenExpr::not_:
        return !matches(e.kids[0], d);
      case GenExpr::and_:
        for (const auto& k : e.kids)
          if (!matches(k, d)) return false;
        return true;
      case GenExpr::or_:
        for (const auto& k : e.kids)
          if (matches(k, d)) return true;
        return false;
    }
    return false;
  }

  std::vector<std::string> doc_ids(const GenExpr& e) const {
    std::vector<std::string> out;
    for (std::size_t d = 0; d < c_.size(); ++d)
      if (matches(e, d)) out.push_back(c_[d].doc_id);
    return out;
  }

 private:
  std::size_t argmax(std::size_t d) const {
    const auto& row = m_.theta[d];
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
      if (row[k] > row[best]) best = k;
    return best;
  }

  std::size_t topic_id(const std::string& v) const {
    for (std::size_t k = 0; k < m_.topic_names.size(); ++k)
      if (m_.topic_names[k] == v) return k;
    return std::stoul(v);
  }

  const litatlas::corpus::Corpus& c_;
  const litatlas::topics::TopicModel& m_;
  const litatlas::chemparse::DocumentElementMatrix& markers_;
  const litatlas::atlas::CaptionLabels& labels_;
};

/// Inventory drawn from loaded artifacts: every topic name/id, the elements
/// present in at least one document plus two absent ones, phrases cut from
/// abstracts, and every rule label.
inline Inventory inventory_from(const litatlas::corpus::Corpus& c, const litatlas::topics::TopicModel& m,
                                const litatlas::chemparse::DocumentElementMatrix& markers,
                                const litatlas::atlas::CaptionLabels& labels, std::uint64_t seed) {
  Inventory inv;
  for (std::size_t k = 0; k < m.K; ++k) {
    inv.topics.push_back(std::to_string(k));
    if (k < m.topic_names.size() && !m.topic_names[k].empty()) inv.topics.push_back(m.topic_names[k]);
  }
  std::vector<std::string> absent;
  for (std::size_t col = 0; col < markers.elements.size(); ++col) {
    bool any = false;
    for (const auto& r : markers.rows) any = any || r[col];
    (any ? inv.elements : absent).push_back(markers.elements[col]);
  }
  if (absent.size() >= 2) {
    inv.elements.push_back(absent.front());
    inv.elements.push_back(absent.back());
  }
  litatlas::Rng rng(seed);
  for (int i = 0; i < 40 && !c.empty(); ++i) {
    const auto& a = c[rng.below(c.size())].abstract;
    if (a.size() < 4) continue;
    const auto len = 3 + rng.below(std::min<std::uint64_t>(20, a.size() - 3));
    const auto start = rng.below(a.size() - len + 1);
    auto p = a.substr(start, len);
    if (rng.below(3) == 0) {
      for (auto& ch : p)
        if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
    }
    inv.phrases.push_back(p);
  }
  inv.phrases.push_back("solid state synthesis");
  inv.phrases.push_back("no such phrase anywhere");
  inv.labels = labels.rule_labels;
  return inv;
}

// ---------------------------------------------------------------------------
// t-SNE objective by direct summation.

inline double kl_direct(const std::vector<double>& P, std::size_t n, const std::vector<std::array<double, 2>>& y) {
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
        z += 1.0 / (1.0 + dx * dx + dy * dy);
      }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double p = P[i * n + j];
      if (i == j || p <= 0.0) continue;
      const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
      const double q = 1.0 / (1.0 + dx * dx + dy * dy) / z;
      kl += p * std::log(p / q);
    }
  return kl;
}

/// Random symmetric joint distribution with zero diagonal.
inline std::vector<double> random_joint(std::size_t n, litatlas::Rng& rng) {
  std::vector<double> P(n * n, 0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.05 + rng.uniform();
      P[i * n + j] = P[j * n + i] = v;
      s += 2 * v;
    }
  for (auto& v : P) v /= s;
  return P;
}

// ---------------------------------------------------------------------------
// Planted-topic corpus: K disjoint vocabularies, each document drawn from one.

struct PlantedCorpus {
  std::vector<std::vector<std::string>> docs;
  std::vector<std::size_t> truth;
};

inline PlantedCorpus planted_corpus(std::size_t K, std::size_t docs, std::size_t length, std::size_t words_per_topic,
                                    std::uint64_t seed) {
  PlantedCorpus out;
  litatlas::Rng rng(seed);
  for (std::size_t d = 0; d < docs; ++d) {
    const auto k = d % K;
    std::vector<std::string> doc;
    for (std::size_t t = 0; t < length; ++t)
      doc.push_back("t" + std::to_string(k) + "w" + std::to_string(rng.below(words_per_topic)));
    out.docs.push_back(std::move(doc));
    out.truth.push_back(k);
  }
  return out;
}

/// Best purity over all topic permutations (K small).
inline double permutation_purity(const std::vector<std::size_t>& truth, const std::vector<int>& assigned, std::size_t K) {
  std::vector<std::size_t> perm(K);
  for (std::size_t i = 0; i < K; ++i) perm[i] = i;
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t d = 0; d < truth.size(); ++d) hits += perm[static_cast<std::size_t>(assigned[d])] == truth[d];
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(truth.size());
}

/// Three clusters of `per` points: within-cluster distance `near`, between
/// clusters `far`, each pair perturbed symmetrically by up to `jitter`.
inline litatlas::textproc::DistanceMatrix three_clusters(std::size_t per, double near, double far, double jitter = 0.0,
                                                         std::uint64_t seed = 0) {
  const std::size_t n = 3 * per;
  litatlas::Rng rng(seed);
  litatlas::textproc::DistanceMatrix D(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double base = (i / per == j / per) ? near : far;
      D(i, j) = D(j, i) = base + jitter * (2.0 * rng.uniform() - 1.0);
    }
  return D;
}

}  // namespace oracle
