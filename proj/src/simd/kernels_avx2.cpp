#include "ratstab/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace ratstab::simd::detail {
namespace {

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d m = _mm_max_pd(lo, hi);
  return std::fmax(_mm_cvtsd_f64(m), _mm_cvtsd_f64(_mm_unpackhi_pd(m, m)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_avx2(const double* a, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) m = _mm256_max_pd(m, _mm256_andnot_pd(sign, _mm256_loadu_pd(a + i)));
  double r = hmax(m);
  for (; i < n; ++i) r = std::fmax(r, std::fabs(a[i]));
  return r;
}

DecayScan decay_scan_avx2(const double* v, std::size_t n, double inv_h, double rate,
                          double tol) {
  DecayScan out;
  out.worst_excess = -std::numeric_limits<double>::infinity();
  if (n < 2) return out;
  const std::size_t m = n - 1;  // number of forward differences
  const __m256d vinv = _mm256_set1_pd(inv_h);
  const __m256d vrate = _mm256_set1_pd(0.5 * rate);
  const __m256d vtol = _mm256_set1_pd(tol);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  __m256d worst = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const __m256d v0 = _mm256_loadu_pd(v + i);
    const __m256d v1 = _mm256_loadu_pd(v + i + 1);
    // Same operation order as the scalar reference, no fusion.
    const __m256d diff = _mm256_mul_pd(_mm256_sub_pd(v1, v0), vinv);
    const __m256d decay = _mm256_add_pd(diff, _mm256_mul_pd(vrate, _mm256_add_pd(v0, v1)));
    const __m256d excess = _mm256_sub_pd(decay, _mm256_mul_pd(vtol, _mm256_add_pd(one, v0)));
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(excess, zero, _CMP_GT_OQ));
    count += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask)));
    worst = _mm256_max_pd(worst, excess);
  }
  double w = hmax(worst);
  for (; i < m; ++i) {
    const double excess = (v[i + 1] - v[i]) * inv_h + 0.5 * rate * (v[i] + v[i + 1]) - tol * (1.0 + v[i]);
    if (excess > 0.0) ++count;
    w = std::fmax(w, excess);
  }
  out.violations = count;
  out.worst_excess = w;
  return out;
}

}  // namespace

const KernelTable& avx2_table() noexcept {
  static const KernelTable table{Backend::Avx2, dot_avx2, axpy_avx2, max_abs_avx2,
                                 decay_scan_avx2};
  return table;
}

}  // namespace ratstab::simd::detail
