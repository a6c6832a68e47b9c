#include <catch_amalgamated.hpp>

#include <cmath>

#include "litatlas/error.hpp"
#include "litatlas/rng.hpp"
#include "litatlas/textproc.hpp"
#include "oracles.hpp"

using namespace litatlas;
using namespace litatlas::textproc;

TEST_CASE("tokenize drops punctuation, numerals and stopwords") {
  CHECK(tokenize("Er3+ doped glasses, annealed at 500 C.", default_stopwords()) ==
        TokenList{"er3+", "doped", "glasses", "annealed"});
  CHECK(tokenize("", default_stopwords()).empty());
  CHECK(tokenize("the of and", default_stopwords()).empty());
  CHECK(tokenize("SiO2-CaO 45S5", {}) == TokenList{"sio2-cao", "45s5"});
}

TEST_CASE("vocabulary counts documents, not occurrences") {
  const std::vector<TokenList> docs = {{"a", "b", "a"}, {"b", "c"}};
  const auto v = build_vocabulary(docs);
  CHECK(v.terms() == std::vector<std::string>{"a", "b", "c"});
  CHECK(v.doc_freq() == std::vector<std::size_t>{1, 2, 1});
  CHECK(v.corpus_size() == 2);
  const auto v2 = build_vocabulary(docs, 2);
  CHECK(v2.terms() == std::vector<std::string>{"b"});

  const auto v3 = build_vocabulary({{"a"}, {}, {"a", "b"}});
  CHECK(v3.corpus_size() == 3);
  CHECK(v3.doc_freq() == std::vector<std::size_t>{2, 1});
}

TEST_CASE("tf-idf weights") {
  // N = 8, df = 2 -> ln 4.
  std::vector<TokenList> docs(8, TokenList{"common"});
  docs[0].push_back("rare");
  docs[1].push_back("rare");
  const auto v = build_vocabulary(docs);
  const auto x = vectorize_tfidf(docs[0], v);
  REQUIRE(x.nnz() == 1);  // "common" has idf 0 and is omitted
  CHECK(x.entries()[0].weight == Catch::Approx(1.386294).margin(1e-6));
  CHECK(vectorize_tfidf(TokenList{"unknown"}, v).nnz() == 0);
  // Repeated tokens do not change binary tf.
  CHECK(vectorize_tfidf(TokenList{"rare", "rare"}, v) == vectorize_tfidf(TokenList{"rare"}, v));
}

TEST_CASE("idf is strictly decreasing in document frequency") {
  const auto v = build_vocabulary({{"a", "b", "c"}, {"b", "c"}, {"c"}, {"d"}});
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j)
      if (v.doc_freq()[i] < v.doc_freq()[j]) CHECK(v.idf(i) > v.idf(j));
}

TEST_CASE("tf-idf matches a naive two-pass reference on random corpora") {
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n_docs = 1 + rng.below(50);
    const auto n_terms = 1 + rng.below(200);
    std::vector<TokenList> docs(n_docs);
    for (auto& d : docs) {
      const auto len = rng.below(40);
      for (std::uint64_t t = 0; t < len; ++t) d.push_back("w" + std::to_string(rng.below(n_terms)));
    }
    const auto ref = oracle::naive_tfidf(docs);
    const auto v = build_vocabulary(docs);
    REQUIRE(v.terms() == ref.terms);
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const auto x = vectorize_tfidf(docs[d], v);
      std::map<std::string, double> got;
      for (const auto& e : x.entries()) got[v.term(e.dim)] = e.weight;
      REQUIRE(got == ref.rows[d]);
    }
  }
}

TEST_CASE("sparse vectors keep sorted, nonzero entries") {
  CHECK_THROWS_AS(SparseVector({{2, 1.0}, {1, 1.0}}, 3), ValidationError);
  CHECK_THROWS_AS(SparseVector({{3, 1.0}}, 3), DimensionError);
  CHECK_THROWS(SparseVector({{0, 0.0}}, 3));
}

TEST_CASE("cosine similarity") {
  const SparseVector a({{0, 1.0}, {1, 1.0}}, 4);
  const SparseVector b({{0, 1.0}}, 4);
  const SparseVector c({{2, 3.0}}, 4);
  CHECK(cosine_similarity(a, a) == Catch::Approx(1.0).margin(1e-12));
  CHECK(cosine_similarity(a, c) == 0.0);
  CHECK(cosine_similarity(a, b) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));
  CHECK(cosine_similarity(a, SparseVector({}, 4)) == 0.0);
}

TEST_CASE("pairwise cosine distance matches brute force and is symmetric") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<SparseVector> vs;
    const std::size_t dim = 6;
    std::vector<std::vector<double>> dense;
    for (int i = 0; i < 5; ++i) {
      std::vector<SparseEntry> e;
      std::vector<double> row(dim, 0.0);
      for (std::size_t k = 0; k < dim; ++k)
        if (rng.below(2)) {
          row[k] = 0.1 + rng.uniform();
          e.push_back({k, row[k]});
        }
      vs.emplace_back(e, dim);
      dense.push_back(row);
    }
    const auto D = pairwise_cosine_distance(vs);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      CHECK(D(i, i) == 0.0);
      for (std::size_t j = 0; j < vs.size(); ++j) {
        double ab = 0, aa = 0, bb = 0;
        for (std::size_t k = 0; k < dim; ++k) {
          ab += dense[i][k] * dense[j][k];
          aa += dense[i][k] * dense[i][k];
          bb += dense[j][k] * dense[j][k];
        }
        const double expect = (aa == 0 || bb == 0) ? 1.0 : 1.0 - ab / std::sqrt(aa * bb);
        if (i != j) CHECK(D(i, j) == Catch::Approx(expect).margin(1e-12));
        CHECK(std::abs(D(i, j) - D(j, i)) <= 1e-12);
        CHECK(D(i, j) >= 0.0);
        CHECK(D(i, j) <= 1.0);
      }
    }
  }
  const SparseVector v({{0, 1.0}}, 2);
  const auto same = pairwise_cosine_distance({v, v});
  CHECK(same(0, 1) == 0.0);
  const auto orth = pairwise_cosine_distance({v, SparseVector({{1, 2.0}}, 2)});
  CHECK(orth(0, 1) == 1.0);
}

TEST_CASE("distance csv has a header row and quoted ids") {
  oracle::TempDir dir;
  DistanceMatrix D(2);
  D(0, 1) = D(1, 0) = 0.5;
  write_distance_csv(D, {"a,1", "b"}, dir / "d.csv");
  const auto text = oracle::slurp(dir / "d.csv");
  CHECK(text.find("\"a,1\"") != std::string::npos);
  CHECK(text.find("0.5") != std::string::npos);
}
