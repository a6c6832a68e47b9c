#include <catch_amalgamated.hpp>

#include <cmath>

#include "litatlas/error.hpp"
#include "litatlas/relevance.hpp"
#include "litatlas/rng.hpp"
#include "oracles.hpp"

using namespace litatlas;
using namespace litatlas::relevance;
using textproc::SparseEntry;
using textproc::SparseVector;

namespace {

SparseVector dense(const std::vector<double>& v) {
  std::vector<SparseEntry> e;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) e.push_back({i, v[i]});
  return SparseVector(e, v.size());
}

Dataset random_dataset(Rng& rng, std::size_t n, std::size_t dim) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim, 0.0);
    for (auto& x : v)
      if (rng.below(3)) x = 2.0 * rng.uniform() - 1.0;
    d.push_back({dense(v), static_cast<int>(i % 2)});
  }
  return d;
}

// Points on either side of the line x0 + 0.5 x1 = 0.2, with a margin.
Dataset separable(Rng& rng, std::size_t n) {
  Dataset d;
  while (d.size() < n) {
    const double a = 2.0 * rng.uniform() - 1.0, b = 2.0 * rng.uniform() - 1.0;
    const double s = a + 0.5 * b - 0.2;
    if (std::abs(s) < 0.05) continue;
    d.push_back({dense({a, b}), s > 0 ? 1 : 0});
  }
  return d;
}

}  // namespace

TEST_CASE("sigmoid symmetry and zero model") {
  CHECK(sigmoid(0.0) == 0.5);
  for (double z : {0.3, 2.0, 40.0, 800.0}) CHECK(sigmoid(z) + sigmoid(-z) == Catch::Approx(1.0).margin(1e-15));
  LogRegModel m;
  m.weights.assign(3, 0.0);
  CHECK(predict(m, dense({1, 2, 3})) == 0.5);
  CHECK_THROWS_AS(predict(m, dense({1, 2})), DimensionError);
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(21);
  for (int inst = 0; inst < 20; ++inst) {
    const auto data = random_dataset(rng, 12, 5);
    std::vector<double> w(5);
    for (auto& x : w) x = rng.normal();
    const double b = rng.normal(), lambda = 0.1 * rng.uniform();
    const auto [gw, gb] = loss_gradient(data, w, b, lambda);
    const double h = 1e-6;
    for (std::size_t k = 0; k < w.size(); ++k) {
      auto wp = w, wm = w;
      wp[k] += h;
      wm[k] -= h;
      const double fd = (loss(data, wp, b, lambda) - loss(data, wm, b, lambda)) / (2 * h);
      CHECK(std::abs(fd - gw[k]) <= 1e-5 * std::max(1.0, std::abs(gw[k])));
    }
    const double fdb = (loss(data, w, b + h, lambda) - loss(data, w, b - h, lambda)) / (2 * h);
    CHECK(std::abs(fdb - gb) <= 1e-5 * std::max(1.0, std::abs(gb)));
  }
}

TEST_CASE("separable toy set is classified perfectly") {
  Rng rng(8);
  const auto data = separable(rng, 20);
  TrainConfig cfg;
  cfg.l2_lambda = 0.0;
  cfg.max_iters = 5000;
  cfg.learning_rate = 4.0 / lipschitz_bound(data, 0.0);
  const auto m = train_logreg(data, cfg);
  std::size_t correct = 0;
  for (const auto& ex : data) correct += classify(m, ex.x) == ex.label;
  CHECK(correct == data.size());
  // The loss trace never rises with a step below 4/L.
  for (std::size_t i = 1; i < m.meta.loss_trace.size(); ++i)
    CHECK(m.meta.loss_trace[i] <= m.meta.loss_trace[i - 1] + 1e-12);
}

TEST_CASE("zero iterations leave a zero model") {
  Rng rng(2);
  TrainConfig cfg;
  cfg.max_iters = 0;
  const auto data = separable(rng, 10);
  const auto m = train_logreg(data, cfg);
  for (double w : m.weights) CHECK(w == 0.0);
  for (const auto& ex : data) CHECK(predict(m, ex.x) == 0.5);
}

TEST_CASE("training preconditions") {
  Dataset one_class = {{dense({1.0}), 1}, {dense({2.0}), 1}};
  CHECK_THROWS_AS(train_logreg(one_class, {}), ValidationError);
  Dataset mixed = {{dense({1.0}), 1}, {dense({2.0, 1.0}), 0}};
  CHECK_THROWS_AS(train_logreg(mixed, {}), ValidationError);
  Dataset big = {{dense({1e200}), 1}, {dense({-1e200}), 0}};
  TrainConfig cfg;
  cfg.learning_rate = 1e200;
  CHECK_THROWS_AS(train_logreg(big, cfg), DivergenceError);
}

TEST_CASE("evaluate matches a brute-force recount") {
  Rng rng(77);
  const auto data = random_dataset(rng, 30, 4);
  LogRegModel m;
  m.weights = {0.7, -1.1, 0.4, 0.9};
  m.bias = 0.05;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& ex : data) {
    double z = m.bias;
    for (const auto& e : ex.x.entries()) z += m.weights[e.dim] * e.weight;
    const int yhat = 1.0 / (1.0 + std::exp(-z)) >= 0.5 ? 1 : 0;
    tp += yhat == 1 && ex.label == 1;
    fp += yhat == 1 && ex.label == 0;
    tn += yhat == 0 && ex.label == 0;
    fn += yhat == 0 && ex.label == 1;
  }
  const auto r = evaluate(m, data);
  CHECK(r.tp == tp);
  CHECK(r.fp == fp);
  CHECK(r.tn == tn);
  CHECK(r.fn == fn);
  CHECK(r.accuracy == Catch::Approx(double(tp + tn) / 30.0));

  SECTION("all-positive predictor on a balanced set") {
    LogRegModel pos;
    pos.weights.assign(4, 0.0);
    pos.bias = 5.0;
    const auto e = evaluate(pos, data);
    CHECK(e.recall == 1.0);
    CHECK(e.accuracy == 0.5);
  }
}

TEST_CASE("stratified split") {
  Rng rng(4);
  const auto data = random_dataset(rng, 100, 3);
  const auto [train, test] = split(data, 0.8, 9);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  std::size_t pos_train = 0, pos_test = 0;
  for (const auto& e : train) pos_train += e.label;
  for (const auto& e : test) pos_test += e.label;
  CHECK(std::abs(static_cast<long>(pos_train) - 40) <= 1);
  CHECK(std::abs(static_cast<long>(pos_test) - 10) <= 1);

  const auto again = split(data, 0.8, 9);
  REQUIRE(again.first.size() == train.size());
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(again.first[i].x == train[i].x);

  CHECK_THROWS_AS(split(data, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(split(data, 1.0, 1), ValidationError);
}

TEST_CASE("model save and load") {
  oracle::TempDir dir;
  Rng rng(12);
  const auto data = separable(rng, 30);
  TrainConfig cfg;
  cfg.max_iters = 50;
  auto m = train_logreg(data, cfg);
  m.vocab = textproc::Vocabulary({"a", "b"}, {1, 2}, 3);
  save_model(m, dir / "m.json");
  const auto back = load_model(dir / "m.json");
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.l2_lambda == m.l2_lambda);
  REQUIRE(back.vocab);
  CHECK(*back.vocab == *m.vocab);
  CHECK(back.meta.iterations == m.meta.iterations);
}
