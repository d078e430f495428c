#include "ratstab/simd/kernels.hpp"

#include <arm_neon.h>

#include <cmath>
#include <limits>

namespace ratstab::simd::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_neon(const double* a, std::size_t n) {
  float64x2_t m = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) m = vmaxq_f64(m, vabsq_f64(vld1q_f64(a + i)));
  double r = vmaxvq_f64(m);
  for (; i < n; ++i) r = std::fmax(r, std::fabs(a[i]));
  return r;
}

DecayScan decay_scan_neon(const double* v, std::size_t n, double inv_h, double rate,
                          double tol) {
  DecayScan out;
  out.worst_excess = -std::numeric_limits<double>::infinity();
  if (n < 2) return out;
  const std::size_t m = n - 1;
  const float64x2_t vinv = vdupq_n_f64(inv_h);
  const float64x2_t vrate = vdupq_n_f64(0.5 * rate);
  const float64x2_t vtol = vdupq_n_f64(tol);
  const float64x2_t one = vdupq_n_f64(1.0);
  float64x2_t worst = vdupq_n_f64(-std::numeric_limits<double>::infinity());
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const float64x2_t v0 = vld1q_f64(v + i);
    const float64x2_t v1 = vld1q_f64(v + i + 1);
    const float64x2_t diff = vmulq_f64(vsubq_f64(v1, v0), vinv);
    const float64x2_t decay = vaddq_f64(diff, vmulq_f64(vrate, vaddq_f64(v0, v1)));
    const float64x2_t excess = vsubq_f64(decay, vmulq_f64(vtol, vaddq_f64(one, v0)));
    const uint64x2_t gt = vcgtzq_f64(excess);
    count += (vgetq_lane_u64(gt, 0) ? 1u : 0u) + (vgetq_lane_u64(gt, 1) ? 1u : 0u);
    worst = vmaxq_f64(worst, excess);
  }
  double w = vmaxvq_f64(worst);
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

const KernelTable& neon_table() noexcept {
  static const KernelTable table{Backend::Neon, dot_neon, axpy_neon, max_abs_neon,
                                 decay_scan_neon};
  return table;
}

}  // namespace ratstab::simd::detail
