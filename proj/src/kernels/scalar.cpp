#include <cmath>

#include "kernels_impl.hpp"

namespace litatlas::kernels {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double student_t_row(const double* xs, const double* ys, std::size_t n, std::size_t i, double* num) {
  const double xi = xs[i];
  const double yi = ys[i];
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = xi - xs[j];
    const double dy = yi - ys[j];
    num[j] = 1.0 / (1.0 + dx * dx + dy * dy);
  }
  num[i] = 0.0;
  for (std::size_t j = 0; j < n; ++j) sum += num[j];
  return sum;
}

void tsne_gradient_row(const double* xs, const double* ys, std::size_t n, std::size_t i, const double* p,
                       const double* num, double p_scale, double inv_z, double* gx, double* gy) {
  const double xi = xs[i];
  const double yi = ys[i];
  double ax = 0.0;
  double ay = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double m = (p_scale * p[j] - inv_z * num[j]) * num[j];
    ax += m * (xi - xs[j]);
    ay += m * (yi - ys[j]);
  }
  *gx += ax;
  *gy += ay;
}

void gaussian_row(const double* d, std::size_t n, double beta, double shift, double* out, double* sum,
                  double* weighted) {
  double s = 0.0;
  double w = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::exp(-beta * (d[j] - shift));
    s += out[j];
    w += d[j] * out[j];
  }
  *sum = s;
  *weighted = w;
}

double p_log_row(const double* p, const double* num, std::size_t n) {
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (p[j] > 0.0) s += p[j] * std::log(num[j]);
  return s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable kTable{"scalar", dot, axpy, student_t_row, tsne_gradient_row, gaussian_row, p_log_row};
  return kTable;
}

}  // namespace litatlas::kernels
