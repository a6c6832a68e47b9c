#include "litatlas/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "csv.hpp"
#include "json.hpp"
#include "litatlas/error.hpp"
#include "litatlas/kernels.hpp"
#include "litatlas/rng.hpp"

namespace litatlas::embed {

namespace {

struct RowEval {
  double perplexity;
  double sum;
};

// Perplexity of p_j ∝ exp(-beta (sq_j - shift)); writes unnormalized weights to `out`.
RowEval evaluate_row(const kernels::KernelTable& k, const std::vector<double>& sq, double beta, double shift,
                     std::vector<double>& out) {
  double sum = 0.0, weighted = 0.0;
  k.gaussian_row(sq.data(), sq.size(), beta, shift, out.data(), &sum, &weighted);
  // H = ln S + beta (E[sq] - shift), in nats.
  const double h = std::log(sum) + beta * (weighted / sum - shift);
  return {std::exp(h), sum};
}

Bandwidth finish(double beta, RowEval e, std::size_t iterations, std::vector<double> w) {
  Bandwidth b;
  b.beta = beta;
  b.sigma = beta > 0.0 ? std::sqrt(1.0 / (2.0 * beta)) : std::numeric_limits<double>::infinity();
  b.perplexity = e.perplexity;
  b.iterations = iterations;
  for (auto& v : w) v /= e.sum;
  b.p = std::move(w);
  return b;
}

void check_finite(const std::vector<Point>& y, std::size_t iteration) {
  for (const auto& p : y)
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
      throw DivergenceError("t-SNE coordinates became non-finite", iteration);
}

}  // namespace

Bandwidth calibrate_bandwidth(const std::vector<double>& distance_row, double perplexity) {
  const std::size_t m = distance_row.size();
  if (m == 0) throw ValidationError("distance row is empty");
  if (!(perplexity >= 1.0)) throw ValidationError("perplexity must be at least 1");
  std::vector<double> sq(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double d = distance_row[j];
    if (!(d >= 0.0) || !std::isfinite(d)) throw ValidationError("distances must be finite and nonnegative");
    sq[j] = d * d;
  }
  const auto [lo_it, hi_it] = std::minmax_element(sq.begin(), sq.end());
  const double shift = *lo_it;
  const double spread = *hi_it - shift;
  const auto& k = kernels::active();
  std::vector<double> w(m);

  if (spread == 0.0) {
    const auto e = evaluate_row(k, sq, 0.0, shift, w);
    if (std::abs(static_cast<double>(m) - perplexity) > kPerplexityTolerance)
      throw CalibrationError("uniform distance row only reaches perplexity " + std::to_string(m), e.perplexity);
    return finish(0.0, e, 0, std::move(w));
  }

  // A non-uniform row reaches perplexity m only in the limit beta -> 0.
  if (perplexity >= static_cast<double>(m)) {
    const auto e = evaluate_row(k, sq, 0.0, shift, w);
    throw CalibrationError("perplexity " + std::to_string(perplexity) + " is not below " + std::to_string(m) +
                               " for a non-uniform row",
                           e.perplexity);
  }

  double min_gap = spread;
  for (double s : sq)
    if (s > shift) min_gap = std::min(min_gap, s - shift);
  // At lo the kernel is flat to ~1e-12; at hi everything beyond the nearest
  // neighbours is below exp(-1000).
  double lo = std::log(1e-12 / spread);
  double hi = std::log(1e3 / min_gap);
  const auto at_lo = evaluate_row(k, sq, std::exp(lo), shift, w);
  if (perplexity > at_lo.perplexity + kPerplexityTolerance)
    throw CalibrationError("perplexity " + std::to_string(perplexity) + " exceeds the maximum " +
                               std::to_string(at_lo.perplexity) + " for this row",
                           at_lo.perplexity);
  const auto at_hi = evaluate_row(k, sq, std::exp(hi), shift, w);
  if (perplexity < at_hi.perplexity - kPerplexityTolerance)
    throw CalibrationError("perplexity " + std::to_string(perplexity) + " is below the minimum " +
                               std::to_string(at_hi.perplexity) + " for this row",
                           at_hi.perplexity);

  double best_beta = std::exp(lo);
  RowEval best = at_lo;
  for (std::size_t it = 1; it <= kMaxBisectionSteps; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double beta = std::exp(mid);
    const auto e = evaluate_row(k, sq, beta, shift, w);
    if (std::abs(e.perplexity - perplexity) < std::abs(best.perplexity - perplexity)) {
      best = e;
      best_beta = beta;
    }
    if (std::abs(e.perplexity - perplexity) <= kPerplexityTolerance) return finish(beta, e, it, std::move(w));
    if (e.perplexity > perplexity) lo = mid;
    else hi = mid;
  }
  throw CalibrationError("perplexity calibration did not converge in " + std::to_string(kMaxBisectionSteps) +
                             " steps (reached " + std::to_string(best.perplexity) + " at beta " +
                             std::to_string(best_beta) + ")",
                         best.perplexity);
}

AffinityMatrix joint_probabilities(const textproc::DistanceMatrix& D, double perplexity) {
  const std::size_t n = D.size();
  if (n < 4) throw ValidationError("t-SNE needs at least 4 points");
  for (std::size_t i = 0; i < n; ++i) {
    if (D(i, i) != 0.0) throw ValidationError("distance matrix diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(D(i, j) - D(j, i)) > 1e-9) throw ValidationError("distance matrix is not symmetric");
  }
  AffinityMatrix a;
  a.n = n;
  a.perplexity = perplexity;
  a.P.assign(n * n, 0.0);
  a.sigmas.resize(n);
  std::vector<double> cond(n * n, 0.0);
  std::vector<double> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0, c = 0; j < n; ++j)
      if (j != i) row[c++] = D(i, j);
    Bandwidth b;
    try {
      b = calibrate_bandwidth(row, perplexity);
    } catch (const CalibrationError& e) {
      throw CalibrationError("row " + std::to_string(i) + ": " + e.what(), e.achieved_perplexity());
    }
    a.sigmas[i] = b.sigma;
    for (std::size_t j = 0, c = 0; j < n; ++j)
      if (j != i) cond[i * n + j] = b.p[c++];
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a.P[i * n + j] = (cond[i * n + j] + cond[j * n + i]) * scale;
  return a;
}

std::vector<Point> initial_coordinates(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> y(n);
  for (auto& p : y) {
    p[0] = 1e-4 * rng.normal();
    p[1] = 1e-4 * rng.normal();
  }
  return y;
}

Embedding2D tsne_fit(const AffinityMatrix& A, const TsneConfig& config) {
  const std::size_t n = A.n;
  if (n < 2 || A.P.size() != n * n) throw ValidationError("affinity matrix is malformed");
  if (!(config.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  std::vector<Point> y = config.init ? *config.init : initial_coordinates(n, config.seed);
  if (y.size() != n) throw DimensionError("initial coordinates do not match the affinity matrix");

  std::vector<double> P(A.P);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) P[i * n + j] = i == j ? 0.0 : std::max(P[i * n + j], kPFloor);
  double p_sum = 0.0, p_log_p = 0.0;
  for (double p : P)
    if (p > 0.0) {
      p_sum += p;
      p_log_p += p * std::log(p);
    }

  const auto& k = kernels::active();
  Embedding2D out;
  out.config = config;
  out.config.init.reset();
  out.perplexity = A.perplexity;
  out.kernels = std::string(k.name);
  out.kl_trace.reserve(config.iters);

  std::vector<double> xs(n), ys(n), num(n * n);
  std::vector<double> ux(n, 0.0), uy(n, 0.0), gain_x(n, 1.0), gain_y(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = y[i][0];
    ys[i] = y[i][1];
  }

  for (std::size_t it = 0; it < config.iters; ++it) {
    const double exaggeration = it < config.exaggeration_iters ? config.early_exaggeration : 1.0;
    const double momentum = it < config.momentum_switch_iter ? config.momentum : config.final_momentum;

    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) z += k.student_t_row(xs.data(), ys.data(), n, i, num.data() + i * n);
    double p_log_num = 0.0;
    for (std::size_t i = 0; i < n; ++i) p_log_num += k.p_log_row(P.data() + i * n, num.data() + i * n, n);
    // sum p ln(p / q) with q = num / Z
    out.kl_trace.push_back(p_log_p - p_log_num + std::log(z) * p_sum);

    const double inv_z = 1.0 / z;
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      k.tsne_gradient_row(xs.data(), ys.data(), n, i, P.data() + i * n, num.data() + i * n, exaggeration, inv_z,
                          &gx, &gy);
      gx *= 4.0;
      gy *= 4.0;
      gain_x[i] = (gx > 0.0) != (ux[i] > 0.0) ? gain_x[i] + 0.2 : std::max(gain_x[i] * 0.8, 0.01);
      gain_y[i] = (gy > 0.0) != (uy[i] > 0.0) ? gain_y[i] + 0.2 : std::max(gain_y[i] * 0.8, 0.01);
      ux[i] = momentum * ux[i] - config.learning_rate * gain_x[i] * gx;
      uy[i] = momentum * uy[i] - config.learning_rate * gain_y[i] * gy;
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] += ux[i];
      ys[i] += uy[i];
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] -= mx;
      ys[i] -= my;
      if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
        throw DivergenceError("t-SNE coordinates became non-finite", it + 1);
    }
  }
  out.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.coords[i] = {xs[i], ys[i]};
  check_finite(out.coords, config.iters);
  return out;
}

double kl_divergence(const AffinityMatrix& A, const std::vector<Point>& y) {
  const std::size_t n = A.n;
  if (y.size() != n) throw DimensionError("coordinates do not match the affinity matrix");
  std::vector<double> num(n * n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
      num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
      z += num[i * n + j];
    }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double p = A.P[i * n + j];
      if (i == j || p <= 0.0) continue;
      kl += p * std::log(p / (num[i * n + j] / z));
    }
  return kl;
}

std::vector<Point> gradient(const AffinityMatrix& A, const std::vector<Point>& y) {
  const std::size_t n = A.n;
  if (y.size() != n) throw DimensionError("coordinates do not match the affinity matrix");
  std::vector<double> num(n * n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
      num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
      z += num[i * n + j];
    }
  std::vector<Point> g(n, Point{0.0, 0.0});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double m = 4.0 * (A.P[i * n + j] - num[i * n + j] / z) * num[i * n + j];
      g[i][0] += m * (y[i][0] - y[j][0]);
      g[i][1] += m * (y[i][1] - y[j][1]);
    }
  return g;
}

Embedding2D embed_vectors(const std::vector<textproc::SparseVector>& vectors, double perplexity,
                          const TsneConfig& config) {
  return tsne_fit(joint_probabilities(textproc::pairwise_cosine_distance(vectors), perplexity), config);
}

// ---------------------------------------------------------------------------

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

void write_embedding(const Embedding2D& e, const std::vector<std::string>& ids, const std::filesystem::path& csv_path,
                     const std::filesystem::path& sidecar) {
  if (ids.size() != e.coords.size()) throw DimensionError("id count does not match the embedding");
  {
    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(csv_path.string(), "cannot open for writing");
    out << "id,x,y\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
      out << csv::field(ids[i]) << ',' << csv::format_double(e.coords[i][0]) << ','
          << csv::format_double(e.coords[i][1]) << '\n';
    if (!out) throw IoError(csv_path.string(), "write failure");
  }
  nlohmann::ordered_json j;
  j["n"] = e.coords.size();
  j["perplexity"] = e.perplexity;
  j["iters"] = e.config.iters;
  j["learning_rate"] = e.config.learning_rate;
  j["early_exaggeration"] = e.config.early_exaggeration;
  j["exaggeration_iters"] = e.config.exaggeration_iters;
  j["momentum"] = e.config.momentum;
  j["final_momentum"] = e.config.final_momentum;
  j["momentum_switch_iter"] = e.config.momentum_switch_iter;
  j["seed"] = e.config.seed;
  j["kernels"] = e.kernels;
  j["kl_trace"] = e.kl_trace;
  std::ofstream out(sidecar, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(sidecar.string(), "cannot open for writing");
  out << j.dump() << '\n';
  if (!out) throw IoError(sidecar.string(), "write failure");
}

EmbeddingTable read_embedding_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  EmbeddingTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line.rfind("id,x,y", 0) != 0) throw LineError(path.string(), 1, "expected header id,x,y");
      continue;
    }
    if (line.empty()) continue;
    try {
      const auto f = csv::split_line(line);
      if (f.size() != 3) throw SchemaError("expected 3 fields");
      t.ids.push_back(f[0]);
      t.coords.push_back({csv::parse_double(f[1]), csv::parse_double(f[2])});
    } catch (const Error& e) {
      throw LineError(path.string(), lineno, e.what());
    }
  }
  return t;
}

}  // namespace litatlas::embed
