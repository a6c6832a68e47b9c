#include "litatlas/relevance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "litatlas/error.hpp"
#include "litatlas/kernels.hpp"
#include "litatlas/rng.hpp"

namespace litatlas::relevance {

namespace {

double margin(const textproc::SparseVector& x, const std::vector<double>& w, double b) {
  double z = b;
  for (const auto& e : x.entries()) z += w[e.dim] * e.weight;
  return z;
}

// ln(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_dims(const Dataset& data, std::size_t dim) {
  for (const auto& ex : data) {
    if (ex.x.dim() != dim) throw ValidationError("examples differ in dimension");
    if (ex.label != 0 && ex.label != 1) throw ValidationError("labels must be 0 or 1");
  }
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double loss(const Dataset& data, const std::vector<double>& weights, double bias, double l2_lambda) {
  if (data.empty()) return 0.0;
  double s = 0.0;
  for (const auto& ex : data) {
    const double z = margin(ex.x, weights, bias);
    // -[y ln s(z) + (1-y) ln(1-s(z))] = softplus(z) - y z
    s += softplus(z) - ex.label * z;
  }
  const auto& k = kernels::active();
  const double reg = 0.5 * l2_lambda * k.dot(weights.data(), weights.data(), weights.size());
  return s / static_cast<double>(data.size()) + reg;
}

std::pair<std::vector<double>, double> loss_gradient(const Dataset& data, const std::vector<double>& weights,
                                                     double bias, double l2_lambda) {
  std::vector<double> gw(weights.size(), 0.0);
  double gb = 0.0;
  const double inv_m = data.empty() ? 0.0 : 1.0 / static_cast<double>(data.size());
  for (const auto& ex : data) {
    const double r = (sigmoid(margin(ex.x, weights, bias)) - ex.label) * inv_m;
    for (const auto& e : ex.x.entries()) gw[e.dim] += r * e.weight;
    gb += r;
  }
  kernels::active().axpy(l2_lambda, weights.data(), gw.data(), gw.size());
  return {std::move(gw), gb};
}

double lipschitz_bound(const Dataset& data, double l2_lambda) {
  if (data.empty()) return 4.0 * l2_lambda;
  double s = 0.0;
  for (const auto& ex : data) {
    const double n = ex.x.norm();
    s += n * n + 1.0;
  }
  return s / static_cast<double>(data.size()) + 4.0 * l2_lambda;
}

LogRegModel train_logreg(const Dataset& data, const TrainConfig& config) {
  if (data.empty()) throw ValidationError("training set is empty");
  const auto dim = data.front().x.dim();
  check_dims(data, dim);
  const auto positives = std::count_if(data.begin(), data.end(), [](const Example& e) { return e.label == 1; });
  if (positives == 0 || positives == static_cast<long>(data.size()))
    throw ValidationError("training set must contain both classes");
  if (!(config.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (config.l2_lambda < 0.0) throw ValidationError("l2_lambda must be nonnegative");

  LogRegModel model;
  model.weights.assign(dim, 0.0);
  model.l2_lambda = config.l2_lambda;
  model.meta.learning_rate = config.learning_rate;
  model.meta.seed = config.seed;

  const auto& k = kernels::active();
  double current = loss(data, model.weights, model.bias, model.l2_lambda);
  model.meta.loss_trace.push_back(current);
  std::size_t it = 0;
  for (; it < config.max_iters; ++it) {
    auto [gw, gb] = loss_gradient(data, model.weights, model.bias, model.l2_lambda);
    k.axpy(-config.learning_rate, gw.data(), model.weights.data(), model.weights.size());
    model.bias -= config.learning_rate * gb;
    const double next = loss(data, model.weights, model.bias, model.l2_lambda);
    if (!std::isfinite(next)) throw DivergenceError("logistic regression loss became non-finite", it + 1);
    model.meta.loss_trace.push_back(next);
    const double decrease = current - next;
    current = next;
    if (decrease >= 0.0 && decrease < config.tol) {
      ++it;
      break;
    }
  }
  model.meta.iterations = it;
  model.meta.final_loss = current;
  return model;
}

double predict(const LogRegModel& model, const textproc::SparseVector& x) {
  if (x.dim() != model.dim())
    throw DimensionError("input has dimension " + std::to_string(x.dim()) + ", model expects " +
                         std::to_string(model.dim()));
  return sigmoid(margin(x, model.weights, model.bias));
}

int classify(const LogRegModel& model, const textproc::SparseVector& x) {
  // p >= 0.5 exactly when the margin is >= 0; compare the margin to avoid rounding at the threshold.
  if (x.dim() != model.dim()) (void)predict(model, x);
  return margin(x, model.weights, model.bias) >= 0.0 ? 1 : 0;
}

EvalMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  EvalMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  const auto total = tp + fp + tn + fn;
  m.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 0.0;
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return m;
}

EvalMetrics evaluate(const LogRegModel& model, const Dataset& test) {
  if (test.empty()) throw ValidationError("evaluation set is empty");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& ex : test) {
    const int y = classify(model, ex.x);
    if (y == 1 && ex.label == 1) ++tp;
    else if (y == 1) ++fp;
    else if (ex.label == 0) ++tn;
    else ++fn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

std::pair<Dataset, Dataset> split(const Dataset& data, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must lie in (0, 1)");
  if (data.empty()) throw ValidationError("cannot split an empty dataset");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label == 1 ? 1 : 0].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& idx : by_class) {
    rng.shuffle(idx);
    const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(idx.size()) + 0.5));
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<long>(n_train));
    test_idx.insert(test_idx.end(), idx.begin() + static_cast<long>(n_train), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  Dataset train, test;
  train.reserve(train_idx.size());
  test.reserve(test_idx.size());
  for (auto i : train_idx) train.push_back(data[i]);
  for (auto i : test_idx) test.push_back(data[i]);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------

void save_model(const LogRegModel& model, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["dim"] = model.dim();
  j["bias"] = model.bias;
  j["weights"] = model.weights;
  j["l2_lambda"] = model.l2_lambda;
  j["meta"] = {{"iterations", model.meta.iterations},
               {"final_loss", model.meta.final_loss},
               {"learning_rate", model.meta.learning_rate},
               {"seed", model.meta.seed}};
  if (model.vocab) {
    j["vocab"] = {{"terms", model.vocab->terms()},
                  {"doc_freq", model.vocab->doc_freq()},
                  {"corpus_size", model.vocab->corpus_size()}};
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << j.dump(1) << '\n';
  if (!out) throw IoError(path.string(), "write failure");
}

LogRegModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    LogRegModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    if (j.at("dim").get<std::size_t>() != m.weights.size()) throw SchemaError("dim does not match weights length");
    m.bias = j.at("bias").get<double>();
    m.l2_lambda = j.at("l2_lambda").get<double>();
    if (const auto it = j.find("meta"); it != j.end()) {
      m.meta.iterations = it->value("iterations", std::size_t{0});
      m.meta.final_loss = it->value("final_loss", 0.0);
      m.meta.learning_rate = it->value("learning_rate", 0.0);
      m.meta.seed = it->value("seed", std::uint64_t{0});
    }
    if (const auto it = j.find("vocab"); it != j.end()) {
      m.vocab = textproc::Vocabulary(it->at("terms").get<std::vector<std::string>>(),
                                     it->at("doc_freq").get<std::vector<std::size_t>>(),
                                     it->at("corpus_size").get<std::size_t>());
      if (m.vocab->size() != m.weights.size()) throw SchemaError("vocabulary size does not match weights");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace litatlas::relevance
