// AVX2+FMA kernels. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the dispatcher has confirmed CPU support.

#include "kernels_impl.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

namespace litatlas::kernels {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp(x): n = round(x / ln2), r = x - n ln2 (two-part constant), degree-13
// Taylor polynomial on |r| <= ln2/2, then scaling by 2^n split in two halves so
// that subnormal results stay representable. Inputs below -745.2 return 0.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo_limit = _mm256_set1_pd(-745.2);
  const __m256d hi_limit = _mm256_set1_pd(709.7);
  const __m256d underflow = _mm256_cmp_pd(x, lo_limit, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo_limit), hi_limit);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  // 1/k! for k = 13 down to 0.
  static constexpr double kInvFact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
      1.0 / 40320.0,      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,
      1.0 / 6.0,          0.5,               1.0,              1.0};
  __m256d p = _mm256_set1_pd(kInvFact[0]);
  for (int k = 1; k < 14; ++k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[k]));

  // 2^n = 2^n1 * 2^n2 with n1 = floor(n/2).
  const __m256d n1 = _mm256_floor_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.5)));
  const __m256d n2 = _mm256_sub_pd(n, n1);
  const __m256d magic = _mm256_set1_pd(0x1.8p52);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const auto pow2 = [&](__m256d e) {
    const __m256i ei = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(e, magic)), _mm256_castpd_si256(magic));
    return _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(ei, bias), 52));
  };
  const __m256d result = _mm256_mul_pd(_mm256_mul_pd(p, pow2(n1)), pow2(n2));
  return _mm256_blendv_pd(result, _mm256_setzero_pd(), underflow);
}

// ln(x) for positive normal x: x = m 2^e with m in [sqrt(1/2), sqrt(2)),
// ln m = 2 atanh(f), f = (m-1)/(m+1), evaluated as an odd series in f.
inline __m256d log_pd(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));

  // Biased exponent as a double: OR the 11 exponent bits into the mantissa of 2^52.
  const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
  const __m256d two52 = _mm256_set1_pd(0x1.0p52);
  __m256d e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(exp_bits, _mm256_castpd_si256(two52))), two52);
  e = _mm256_sub_pd(e, _mm256_set1_pd(1023.0));

  const __m256d sqrt2 = _mm256_set1_pd(1.41421356237309504880);
  const __m256d big = _mm256_cmp_pd(m, sqrt2, _CMP_GE_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  e = _mm256_add_pd(e, _mm256_and_pd(big, _mm256_set1_pd(1.0)));

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d f = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d f2 = _mm256_mul_pd(f, f);
  // sum_{k=0}^{11} f2^k / (2k+1), Horner from the highest term.
  __m256d s = _mm256_set1_pd(1.0 / 23.0);
  for (int k = 10; k >= 0; --k) s = _mm256_fmadd_pd(s, f2, _mm256_set1_pd(1.0 / (2.0 * k + 1.0)));
  const __m256d log_m = _mm256_mul_pd(_mm256_add_pd(f, f), s);

  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  return _mm256_fmadd_pd(e, ln2_hi, _mm256_fmadd_pd(e, ln2_lo, log_m));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j + 4), _mm256_loadu_pd(b + j + 4), acc1);
  }
  for (; j + 4 <= n; j += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; j < n; ++j) s += a[j] * b[j];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4)
    _mm256_storeu_pd(y + j, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + j), _mm256_loadu_pd(y + j)));
  for (; j < n; ++j) y[j] += alpha * x[j];
}

double student_t_row(const double* xs, const double* ys, std::size_t n, std::size_t i, double* num) {
  const __m256d xi = _mm256_set1_pd(xs[i]);
  const __m256d yi = _mm256_set1_pd(ys[i]);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d dx = _mm256_sub_pd(xi, _mm256_loadu_pd(xs + j));
    const __m256d dy = _mm256_sub_pd(yi, _mm256_loadu_pd(ys + j));
    const __m256d d2 = _mm256_fmadd_pd(dx, dx, _mm256_fmadd_pd(dy, dy, one));
    const __m256d q = _mm256_div_pd(one, d2);
    _mm256_storeu_pd(num + j, q);
    acc = _mm256_add_pd(acc, q);
  }
  double sum = hsum(acc);
  for (; j < n; ++j) {
    const double dx = xs[i] - xs[j];
    const double dy = ys[i] - ys[j];
    num[j] = 1.0 / (1.0 + dx * dx + dy * dy);
    sum += num[j];
  }
  // The self term is exactly 1.
  sum -= num[i];
  num[i] = 0.0;
  return sum;
}

void tsne_gradient_row(const double* xs, const double* ys, std::size_t n, std::size_t i, const double* p,
                       const double* num, double p_scale, double inv_z, double* gx, double* gy) {
  const __m256d xi = _mm256_set1_pd(xs[i]);
  const __m256d yi = _mm256_set1_pd(ys[i]);
  const __m256d ps = _mm256_set1_pd(p_scale);
  const __m256d iz = _mm256_set1_pd(inv_z);
  __m256d ax = _mm256_setzero_pd();
  __m256d ay = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d q = _mm256_loadu_pd(num + j);
    const __m256d m = _mm256_mul_pd(_mm256_fmsub_pd(ps, _mm256_loadu_pd(p + j), _mm256_mul_pd(iz, q)), q);
    ax = _mm256_fmadd_pd(m, _mm256_sub_pd(xi, _mm256_loadu_pd(xs + j)), ax);
    ay = _mm256_fmadd_pd(m, _mm256_sub_pd(yi, _mm256_loadu_pd(ys + j)), ay);
  }
  double sx = hsum(ax);
  double sy = hsum(ay);
  for (; j < n; ++j) {
    const double m = (p_scale * p[j] - inv_z * num[j]) * num[j];
    sx += m * (xs[i] - xs[j]);
    sy += m * (ys[i] - ys[j]);
  }
  *gx += sx;
  *gy += sy;
}

void gaussian_row(const double* d, std::size_t n, double beta, double shift, double* out, double* sum,
                  double* weighted) {
  const __m256d nb = _mm256_set1_pd(-beta);
  const __m256d sh = _mm256_set1_pd(shift);
  __m256d s = _mm256_setzero_pd();
  __m256d w = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d dj = _mm256_loadu_pd(d + j);
    const __m256d e = exp_pd(_mm256_mul_pd(nb, _mm256_sub_pd(dj, sh)));
    _mm256_storeu_pd(out + j, e);
    s = _mm256_add_pd(s, e);
    w = _mm256_fmadd_pd(dj, e, w);
  }
  double ss = hsum(s);
  double ws = hsum(w);
  for (; j < n; ++j) {
    out[j] = std::exp(-beta * (d[j] - shift));
    ss += out[j];
    ws += d[j] * out[j];
  }
  *sum = ss;
  *weighted = ws;
}

double p_log_row(const double* p, const double* num, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d pj = _mm256_loadu_pd(p + j);
    const __m256d active = _mm256_cmp_pd(pj, zero, _CMP_GT_OQ);
    // Inactive lanes take log(1) = 0 so no NaN can leak into the sum.
    const __m256d q = _mm256_blendv_pd(one, _mm256_loadu_pd(num + j), active);
    acc = _mm256_fmadd_pd(_mm256_and_pd(pj, active), log_pd(q), acc);
  }
  double s = hsum(acc);
  for (; j < n; ++j)
    if (p[j] > 0.0) s += p[j] * std::log(num[j]);
  return s;
}

}  // namespace

const KernelTable* avx2_table_unchecked() {
  static const KernelTable kTable{"avx2", dot, axpy, student_t_row, tsne_gradient_row, gaussian_row, p_log_row};
  return &kTable;
}

}  // namespace litatlas::kernels

#else

namespace litatlas::kernels {
const KernelTable* avx2_table_unchecked() { return nullptr; }
}  // namespace litatlas::kernels

#endif
