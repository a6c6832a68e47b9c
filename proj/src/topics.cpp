#include "litatlas/topics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "litatlas/error.hpp"
#include "litatlas/rng.hpp"

namespace litatlas::topics {

namespace {

// Initial assignment of token `pos` in the document keyed `key`. Depends only
// on (seed, key, pos), never on document order.
std::size_t initial_topic(std::uint64_t seed, std::uint64_t key, std::size_t pos, std::size_t K) {
  const std::uint64_t h = splitmix64(splitmix64(seed ^ splitmix64(key)) + pos);
  return static_cast<std::size_t>((static_cast<unsigned __int128>(h) * K) >> 64);
}

void accumulate_estimates(const GibbsCounts& c, std::size_t K, std::size_t V, double alpha, double beta,
                          std::vector<std::vector<double>>& phi, std::vector<std::vector<double>>& theta,
                          double weight) {
  const double vbeta = static_cast<double>(V) * beta;
  for (std::size_t k = 0; k < K; ++k) {
    const double denom = c.n_k[k] + vbeta;
    for (std::size_t w = 0; w < V; ++w) phi[k][w] += weight * (c.n_kw[k * V + w] + beta) / denom;
  }
  const double kalpha = static_cast<double>(K) * alpha;
  for (std::size_t d = 0; d < c.docs.size(); ++d) {
    const double denom = static_cast<double>(c.docs[d].size()) + kalpha;
    for (std::size_t k = 0; k < K; ++k) theta[d][k] += weight * (c.n_dk[d * K + k] + alpha) / denom;
  }
}

// Rescale rows so they sum to 1 exactly up to rounding; averaging and
// division leave a few ulps of drift otherwise.
void renormalize(std::vector<std::vector<double>>& rows) {
  for (auto& r : rows) {
    const double s = std::accumulate(r.begin(), r.end(), 0.0);
    if (s > 0) for (auto& v : r) v /= s;
  }
}

std::size_t argmax_row(const std::vector<double>& row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

}  // namespace

std::string TopicModel::topic_name(std::size_t k) const {
  if (k < topic_names.size() && !topic_names[k].empty()) return topic_names[k];
  return std::to_string(k);
}

std::optional<std::size_t> TopicModel::find_topic(std::string_view name_or_id) const {
  for (std::size_t k = 0; k < topic_names.size() && k < K; ++k)
    if (topic_names[k] == name_or_id) return k;
  std::size_t id = 0;
  const auto* end = name_or_id.data() + name_or_id.size();
  const auto [p, ec] = std::from_chars(name_or_id.data(), end, id);
  if (ec == std::errc() && p == end && !name_or_id.empty() && id < K) return id;
  return std::nullopt;
}

void verify_counts(const GibbsCounts& c, std::size_t K, std::size_t V) {
  const auto D = c.docs.size();
  if (c.z.size() != D || c.n_kw.size() != K * V || c.n_dk.size() != D * K || c.n_k.size() != K)
    throw Error("count tables have the wrong shape");
  std::vector<int> n_kw(K * V, 0), n_dk(D * K, 0), n_k(K, 0);
  std::size_t total = 0;
  for (std::size_t d = 0; d < D; ++d) {
    if (c.z[d].size() != c.docs[d].size()) throw Error("assignment count differs from token count");
    for (std::size_t i = 0; i < c.docs[d].size(); ++i) {
      const auto k = static_cast<std::size_t>(c.z[d][i]);
      const auto w = static_cast<std::size_t>(c.docs[d][i]);
      if (k >= K || w >= V) throw Error("assignment out of range");
      ++n_kw[k * V + w];
      ++n_dk[d * K + k];
      ++n_k[k];
      ++total;
    }
  }
  if (n_kw != c.n_kw || n_dk != c.n_dk || n_k != c.n_k) throw Error("count tables disagree with assignments");
  const auto sum_k = std::accumulate(c.n_k.begin(), c.n_k.end(), std::size_t{0});
  if (total != c.total_tokens || sum_k != c.total_tokens)
    throw Error("topic counts sum to " + std::to_string(sum_k) + ", expected " + std::to_string(c.total_tokens));
}

TopicModel fit_lda(const std::vector<std::vector<int>>& docs, std::vector<std::string> vocab,
                   const LdaOptions& opt, const PassCallback& on_pass, std::span<const std::uint64_t> doc_keys) {
  const std::size_t K = opt.K;
  const std::size_t V = vocab.size();
  const std::size_t D = docs.size();
  if (K < 2) throw ValidationError("LDA needs at least 2 topics");
  if (opt.passes < 1) throw ValidationError("LDA needs at least 1 pass");
  if (D == 0) throw ValidationError("LDA corpus is empty");
  if (!doc_keys.empty() && doc_keys.size() != D) throw ValidationError("doc_keys must match the document count");
  const double alpha = opt.alpha.value_or(50.0 / static_cast<double>(K));
  const double beta = opt.beta;
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ValidationError("alpha and beta must be positive");

  GibbsCounts c;
  c.docs = docs;
  c.z.resize(D);
  c.n_kw.assign(K * V, 0);
  c.n_dk.assign(D * K, 0);
  c.n_k.assign(K, 0);
  for (std::size_t d = 0; d < D; ++d) {
    const std::uint64_t key = doc_keys.empty() ? d : doc_keys[d];
    c.z[d].resize(docs[d].size());
    for (std::size_t i = 0; i < docs[d].size(); ++i) {
      const int w = docs[d][i];
      if (w < 0 || static_cast<std::size_t>(w) >= V) throw ValidationError("word id out of vocabulary range");
      const auto k = initial_topic(opt.seed, key, i, K);
      c.z[d][i] = static_cast<int>(k);
      ++c.n_kw[k * V + static_cast<std::size_t>(w)];
      ++c.n_dk[d * K + k];
      ++c.n_k[k];
      ++c.total_tokens;
    }
  }
  if (c.total_tokens == 0) throw ValidationError("every LDA document is empty");
  if (on_pass) on_pass(0, c);

  TopicModel m;
  m.K = K;
  m.alpha = alpha;
  m.beta = beta;
  m.seed = opt.seed;
  m.passes = opt.passes;
  m.vocab = std::move(vocab);
  m.phi.assign(K, std::vector<double>(V, 0.0));
  m.theta.assign(D, std::vector<double>(K, 0.0));

  Rng rng(splitmix64(opt.seed ^ 0x6c64615f73776565ULL));
  const double vbeta = static_cast<double>(V) * beta;
  std::vector<double> cum(K);
  const std::size_t average_last = std::min(opt.average_last, opt.passes);
  for (std::size_t pass = 1; pass <= opt.passes; ++pass) {
    for (std::size_t d = 0; d < D; ++d) {
      int* ndk = c.n_dk.data() + d * K;
      for (std::size_t i = 0; i < c.docs[d].size(); ++i) {
        const auto w = static_cast<std::size_t>(c.docs[d][i]);
        const auto old = static_cast<std::size_t>(c.z[d][i]);
        --c.n_kw[old * V + w];
        --ndk[old];
        --c.n_k[old];
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          total += (ndk[k] + alpha) * (c.n_kw[k * V + w] + beta) / (c.n_k[k] + vbeta);
          cum[k] = total;
        }
        const double u = rng.uniform() * total;
        std::size_t k = 0;
        while (k + 1 < K && cum[k] <= u) ++k;
        c.z[d][i] = static_cast<int>(k);
        ++c.n_kw[k * V + w];
        ++ndk[k];
        ++c.n_k[k];
      }
    }
    if (opt.check_counts) verify_counts(c, K, V);
    if (on_pass) on_pass(pass, c);
    if (average_last > 0 && pass > opt.passes - average_last)
      accumulate_estimates(c, K, V, alpha, beta, m.phi, m.theta, 1.0 / static_cast<double>(average_last));
  }
  if (average_last == 0) accumulate_estimates(c, K, V, alpha, beta, m.phi, m.theta, 1.0);
  renormalize(m.phi);
  renormalize(m.theta);

  m.assignments.resize(D);
  for (std::size_t d = 0; d < D; ++d) m.assignments[d] = static_cast<int>(argmax_row(m.theta[d]));
  m.counts = std::move(c);
  return m;
}

TopicModel fit_lda(const std::vector<textproc::TokenList>& docs, const LdaOptions& options,
                   const PassCallback& on_pass) {
  if (docs.empty()) throw ValidationError("LDA corpus is empty");
  const auto vocab = textproc::build_vocabulary(docs, 1);
  std::vector<std::vector<int>> ids;
  ids.reserve(docs.size());
  for (const auto& d : docs) ids.push_back(textproc::to_ids(d, vocab));
  return fit_lda(ids, vocab.terms(), options, on_pass);
}

std::vector<std::pair<std::string, double>> top_words(const TopicModel& model, std::size_t topic, std::size_t n) {
  if (topic >= model.K) throw ValidationError("topic " + std::to_string(topic) + " out of range");
  const auto& row = model.phi[topic];
  std::vector<std::size_t> idx(row.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  n = std::min(n, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(n), idx.end(), [&](std::size_t a, std::size_t b) {
    return row[a] != row[b] ? row[a] > row[b] : a < b;
  });
  std::vector<std::pair<std::string, double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(model.vocab[idx[i]], row[idx[i]]);
  return out;
}

std::size_t assign_topic(const TopicModel& model, std::size_t doc_index) {
  if (doc_index >= model.theta.size()) throw ValidationError("document index out of range");
  return argmax_row(model.theta[doc_index]);
}

CoherenceReport coherence(const TopicModel& model, const std::vector<textproc::TokenList>& docs,
                          std::size_t top_n) {
  if (top_n < 2) throw ValidationError("coherence needs top_n >= 2");
  std::unordered_map<std::string, std::size_t> term_index;
  for (std::size_t i = 0; i < model.vocab.size(); ++i) term_index.emplace(model.vocab[i], i);
  // Document sets per vocabulary term, as sorted doc indices.
  std::vector<std::vector<std::size_t>> postings(model.vocab.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    std::vector<std::size_t> seen;
    for (const auto& t : docs[d]) {
      const auto it = term_index.find(t);
      if (it != term_index.end()) seen.push_back(it->second);
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (auto w : seen) postings[w].push_back(d);
  }
  auto co_count = [&](std::size_t a, std::size_t b) {
    const auto& pa = postings[a];
    const auto& pb = postings[b];
    std::size_t n = 0;
    for (std::size_t i = 0, j = 0; i < pa.size() && j < pb.size();) {
      if (pa[i] < pb[j]) ++i;
      else if (pb[j] < pa[i]) ++j;
      else ++n, ++i, ++j;
    }
    return n;
  };

  CoherenceReport r;
  r.K = model.K;
  for (std::size_t k = 0; k < model.K; ++k) {
    const auto words = top_words(model, k, top_n);
    std::vector<std::size_t> ids;
    for (const auto& [t, p] : words) ids.push_back(term_index.at(t));
    double s = 0.0;
    for (std::size_t j = 1; j < ids.size(); ++j) {
      const auto dj = postings[ids[j]].size();
      if (dj == 0) throw ValidationError("top word \"" + model.vocab[ids[j]] + "\" occurs in no document");
      for (std::size_t i = 0; i < j; ++i)
        s += std::log((static_cast<double>(co_count(ids[i], ids[j])) + 1.0) / static_cast<double>(dj));
    }
    r.per_topic.push_back(s);
  }
  r.mean = std::accumulate(r.per_topic.begin(), r.per_topic.end(), 0.0) / static_cast<double>(r.K);
  return r;
}

std::vector<std::pair<std::size_t, double>> coherence_scan(const std::vector<textproc::TokenList>& docs,
                                                           const std::vector<std::size_t>& K_values,
                                                           const LdaOptions& base, std::size_t top_n) {
  if (K_values.empty()) throw ValidationError("coherence scan needs at least one K");
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto K : K_values) {
    LdaOptions o = base;
    o.K = K;
    if (!base.alpha) o.alpha.reset();
    const auto m = fit_lda(docs, o);
    out.emplace_back(K, coherence(m, docs, top_n).mean);
  }
  return out;
}

corpus::Corpus filter_by_topics(const corpus::Corpus& corpus, const TopicModel& model,
                                const std::set<std::size_t>& drop) {
  if (model.num_docs() != corpus.size())
    throw ValidationError("topic model covers " + std::to_string(model.num_docs()) + " documents, corpus has " +
                          std::to_string(corpus.size()));
  for (auto k : drop)
    if (k >= model.K) throw ValidationError("topic " + std::to_string(k) + " out of range");
  std::vector<corpus::Document> kept;
  for (std::size_t d = 0; d < corpus.size(); ++d)
    if (!drop.count(assign_topic(model, d))) kept.push_back(corpus[d]);
  return corpus::Corpus(std::move(kept), corpus.source_manifest());
}

SubtopicFit refit_subtopics(const std::vector<textproc::TokenList>& docs, const TopicModel& model,
                            std::size_t topic, const LdaOptions& options) {
  if (topic >= model.K) throw ValidationError("topic " + std::to_string(topic) + " out of range");
  if (docs.size() != model.num_docs()) throw ValidationError("documents do not align with the topic model");
  SubtopicFit fit;
  std::vector<textproc::TokenList> subset;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (assign_topic(model, d) == topic) {
      fit.doc_indices.push_back(d);
      subset.push_back(docs[d]);
    }
  }
  if (subset.size() < options.K || subset.empty())
    throw ValidationError("topic " + std::to_string(topic) + " has " + std::to_string(subset.size()) +
                          " documents, fewer than K=" + std::to_string(options.K));
  fit.model = fit_lda(subset, options);
  return fit;
}

std::vector<std::string> name_topics_by_anchors(
    const TopicModel& model, const std::vector<std::pair<std::string, std::vector<std::string>>>& anchors) {
  std::vector<std::string> names(model.K);
  std::unordered_map<std::string, std::size_t> term_index;
  for (std::size_t i = 0; i < model.vocab.size(); ++i) term_index.emplace(model.vocab[i], i);
  for (const auto& [name, keywords] : anchors) {
    std::optional<std::size_t> best;
    double best_mass = 0.0;
    for (std::size_t k = 0; k < model.K; ++k) {
      if (!names[k].empty()) continue;
      double mass = 0.0;
      for (const auto& kw : keywords)
        if (const auto it = term_index.find(kw); it != term_index.end()) mass += model.phi[k][it->second];
      if (!best || mass > best_mass) {
        best = k;
        best_mass = mass;
      }
    }
    if (best && best_mass > 0.0) names[*best] = name;
  }
  return names;
}

textproc::TokenList document_tokens(const corpus::Document& doc, const textproc::StopwordSet& stopwords) {
  return textproc::tokenize(doc.abstract, stopwords);
}

// ---------------------------------------------------------------------------

std::string model_to_json(const TopicModel& m) {
  nlohmann::ordered_json j;
  j["K"] = m.K;
  j["alpha"] = m.alpha;
  j["beta"] = m.beta;
  j["seed"] = m.seed;
  j["passes"] = m.passes;
  j["vocab"] = m.vocab;
  j["phi"] = m.phi;
  j["theta"] = m.theta;
  j["assignments"] = m.assignments;
  j["topic_names"] = m.topic_names;
  return j.dump();
}

TopicModel model_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    TopicModel m;
    m.K = j.at("K").get<std::size_t>();
    m.alpha = j.at("alpha").get<double>();
    m.beta = j.at("beta").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.passes = j.at("passes").get<std::size_t>();
    m.vocab = j.at("vocab").get<std::vector<std::string>>();
    m.phi = j.at("phi").get<std::vector<std::vector<double>>>();
    m.theta = j.at("theta").get<std::vector<std::vector<double>>>();
    m.assignments = j.at("assignments").get<std::vector<int>>();
    if (const auto it = j.find("topic_names"); it != j.end()) m.topic_names = it->get<std::vector<std::string>>();
    if (m.phi.size() != m.K) throw SchemaError("phi must have K rows");
    for (const auto& r : m.phi)
      if (r.size() != m.vocab.size()) throw SchemaError("phi rows must match the vocabulary size");
    for (const auto& r : m.theta)
      if (r.size() != m.K) throw SchemaError("theta rows must have K entries");
    if (m.assignments.size() != m.theta.size()) throw SchemaError("assignments must match theta rows");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("topic model: ") + e.what());
  }
}

void save_model(const TopicModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << model_to_json(model) << '\n';
  if (!out) throw IoError(path.string(), "write failure");
}

TopicModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace litatlas::topics
