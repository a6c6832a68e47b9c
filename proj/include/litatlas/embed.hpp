#pragma once

// Exact t-SNE over a precomputed distance matrix.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "litatlas/textproc.hpp"

namespace litatlas::embed {

using Point = std::array<double, 2>;

struct Bandwidth {
  double beta = 0.0;   // precision of the Gaussian kernel over squared distances
  double sigma = 0.0;  // sqrt(1 / (2 beta)); +inf for a uniform row
  double perplexity = 0.0;
  std::size_t iterations = 0;
  std::vector<double> p;  // conditional distribution over the row
};

/// Finds beta such that the conditional distribution
/// p_j ∝ exp(-beta * d_j^2) has 2^H = perplexity within 1e-5, using at most
/// 64 bisection steps. `distance_row` excludes the point itself.
/// Throws CalibrationError when the target is unreachable.
Bandwidth calibrate_bandwidth(const std::vector<double>& distance_row, double perplexity);

inline constexpr double kPerplexityTolerance = 1e-5;
inline constexpr std::size_t kMaxBisectionSteps = 64;

/// Joint probabilities p_ij = (p_{j|i} + p_{i|j}) / 2n.
struct AffinityMatrix {
  std::size_t n = 0;
  std::vector<double> P;  // n x n, row-major
  double perplexity = 0.0;
  std::vector<double> sigmas;

  double operator()(std::size_t i, std::size_t j) const { return P[i * n + j]; }
};

/// Requires n >= 4. Calibration failures are rethrown naming the row.
AffinityMatrix joint_probabilities(const textproc::DistanceMatrix& D, double perplexity);

struct TsneConfig {
  std::size_t iters = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iter = 250;
  std::uint64_t seed = 0;
  /// Starting coordinates; drawn from N(0, 1e-4^2) with `seed` when unset.
  std::optional<std::vector<Point>> init;
};

struct Embedding2D {
  std::vector<Point> coords;
  std::vector<double> kl_trace;  // KL(P || Q) at the start of each iteration, unexaggerated
  TsneConfig config;
  double perplexity = 0.0;
  std::string kernels;  // kernel table used
};

/// Floor applied to P entries inside the optimizer.
inline constexpr double kPFloor = 1e-12;

/// Gradient descent with momentum and per-coordinate gains on KL(P || Q).
/// Throws DivergenceError when a coordinate becomes non-finite.
Embedding2D tsne_fit(const AffinityMatrix& P, const TsneConfig& config);

/// N(0, 1e-4^2) draws, x then y per point.
std::vector<Point> initial_coordinates(std::size_t n, std::uint64_t seed);

/// sum over i != j of p_ij ln(p_ij / q_ij) with a Student-t Q; p_ij = 0 terms add 0.
double kl_divergence(const AffinityMatrix& P, const std::vector<Point>& coords);

/// dKL/dy_i = 4 sum_j (p_ij - q_ij)(1 + |y_i - y_j|^2)^-1 (y_i - y_j).
std::vector<Point> gradient(const AffinityMatrix& P, const std::vector<Point>& coords);

/// Cosine distances, calibrated affinities, then tsne_fit.
Embedding2D embed_vectors(const std::vector<textproc::SparseVector>& vectors, double perplexity,
                          const TsneConfig& config);

/// CSV `id,x,y` plus a JSON sidecar (config, perplexity, kl_trace) at `sidecar`.
void write_embedding(const Embedding2D& e, const std::vector<std::string>& ids, const std::filesystem::path& csv,
                     const std::filesystem::path& sidecar);

struct EmbeddingTable {
  std::vector<std::string> ids;
  std::vector<Point> coords;
};
EmbeddingTable read_embedding_csv(const std::filesystem::path& csv);

/// Sidecar path for an embedding CSV: same stem, `.json` extension.
std::filesystem::path sidecar_path(const std::filesystem::path& csv);

}  // namespace litatlas::embed
