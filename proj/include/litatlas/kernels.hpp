#pragma once

// Dense arithmetic kernels behind the t-SNE and classifier inner loops.
//
// Every kernel has a scalar reference implementation; an AVX2+FMA variant is
// compiled on x86-64 and selected at runtime when the CPU supports it. The
// variants agree to within floating-point reassociation (see test_kernels).
// Set LITATLAS_KERNELS=scalar|avx2 to override the automatic choice.

#include <cstddef>
#include <string_view>
#include <vector>

namespace litatlas::kernels {

struct KernelTable {
  std::string_view name;

  /// sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

  /// Student-t numerators of point i against all n points:
  /// num[j] = 1 / (1 + (xs[i]-xs[j])^2 + (ys[i]-ys[j])^2), num[i] = 0.
  /// Returns sum_j num[j].
  double (*student_t_row)(const double* xs, const double* ys, std::size_t n, std::size_t i, double* num);

  /// Adds sum_j (p_scale*p[j] - inv_z*num[j]) * num[j] * (pos_i - pos_j) to *gx, *gy.
  void (*tsne_gradient_row)(const double* xs, const double* ys, std::size_t n, std::size_t i,
                            const double* p, const double* num, double p_scale, double inv_z,
                            double* gx, double* gy);

  /// out[j] = exp(-beta * (d[j] - shift)); *sum = sum_j out[j]; *weighted = sum_j d[j] * out[j].
  void (*gaussian_row)(const double* d, std::size_t n, double beta, double shift, double* out,
                       double* sum, double* weighted);

  /// sum over j with p[j] > 0 of p[j] * ln(num[j]). num[j] must be positive and normal where p[j] > 0.
  double (*p_log_row)(const double* p, const double* num, std::size_t n);
};

const KernelTable& scalar_table();

/// AVX2+FMA table, or nullptr when not compiled in or unsupported by this CPU.
const KernelTable* avx2_table();

/// Table used by the library. Chosen once from the CPU and LITATLAS_KERNELS.
const KernelTable& active();

/// Forces a table by name ("scalar", "avx2", or "auto"). Throws ValidationError
/// when the named table is unavailable.
void set_active(std::string_view name);

/// Names of the tables usable on this machine.
std::vector<std::string_view> available();

}  // namespace litatlas::kernels
