#pragma once

// Binary relevance classifier: L2-regularized logistic regression over TF-IDF
// vectors, trained by full-batch gradient descent.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "litatlas/textproc.hpp"

namespace litatlas::relevance {

struct Example {
  textproc::SparseVector x;
  int label = 0;  // 0 or 1
};
using Dataset = std::vector<Example>;

struct TrainConfig {
  double learning_rate = 1.0;
  double l2_lambda = 1e-4;
  std::size_t max_iters = 2000;
  double tol = 1e-9;
  std::uint64_t seed = 0;
};

struct TrainingMeta {
  std::size_t iterations = 0;
  double final_loss = 0.0;
  double learning_rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> loss_trace;  // loss before each step plus the final loss
};

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  double l2_lambda = 0.0;
  TrainingMeta meta;
  /// Vocabulary the weights index into; needed to vectorize unseen text.
  std::optional<textproc::Vocabulary> vocab;

  std::size_t dim() const noexcept { return weights.size(); }
};

struct EvalMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Mean cross-entropy plus (lambda/2)|w|^2; the bias is not regularized.
double loss(const Dataset& data, const std::vector<double>& weights, double bias, double l2_lambda);

/// Analytic gradient of `loss`: first = d/dw, second = d/db.
std::pair<std::vector<double>, double> loss_gradient(const Dataset& data, const std::vector<double>& weights,
                                                     double bias, double l2_lambda);

/// Upper bound L on 4x the largest Hessian eigenvalue of `loss`:
/// mean |[x, 1]|^2 + 4 lambda. Steps below 4/L never increase the loss.
double lipschitz_bound(const Dataset& data, double l2_lambda);

/// Throws ValidationError for single-class or mixed-dimension data and
/// DivergenceError when the loss becomes non-finite.
LogRegModel train_logreg(const Dataset& data, const TrainConfig& config);

double sigmoid(double z);

/// sigmoid(w.x + b). Throws DimensionError when x.dim() != model.dim().
double predict(const LogRegModel& model, const textproc::SparseVector& x);
int classify(const LogRegModel& model, const textproc::SparseVector& x);

/// Confusion counts at threshold 0.5.
EvalMetrics evaluate(const LogRegModel& model, const Dataset& test);
/// Confusion counts from precomputed (label, prediction) pairs.
EvalMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

/// Stratified deterministic split: per class, round(ratio * n_class) go to train.
std::pair<Dataset, Dataset> split(const Dataset& data, double ratio, std::uint64_t seed);

void save_model(const LogRegModel& model, const std::filesystem::path& path);
LogRegModel load_model(const std::filesystem::path& path);

}  // namespace litatlas::relevance
