#include "ratstab/simd/kernels.hpp"

#include <cmath>
#include <limits>

namespace ratstab::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double max_abs_scalar(const double* a, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(a[i]));
  return m;
}

DecayScan decay_scan_scalar(const double* v, std::size_t n, double inv_h, double rate,
                            double tol) {
  DecayScan out;
  out.worst_excess = -std::numeric_limits<double>::infinity();
  if (n < 2) return out;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double excess = (v[i + 1] - v[i]) * inv_h + 0.5 * rate * (v[i] + v[i + 1]) - tol * (1.0 + v[i]);
    if (excess > 0.0) ++out.violations;
    out.worst_excess = std::fmax(out.worst_excess, excess);
  }
  return out;
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{Backend::Scalar, dot_scalar, axpy_scalar, max_abs_scalar,
                                 decay_scan_scalar};
  return table;
}

}  // namespace ratstab::simd::detail
