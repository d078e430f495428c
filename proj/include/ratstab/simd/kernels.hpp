#pragma once

// Data-parallel inner loops used by the Lyapunov elimination, the
// Krasovskii integral and the decay scan. Every kernel has a scalar
// reference implementation; vector variants (AVX2+FMA on x86-64, NEON on
// AArch64) are selected once at runtime and must agree with the scalar
// path up to reassociation of the reductions.

#include <cstddef>
#include <span>
#include <string_view>

namespace ratstab::simd {

enum class Backend { Scalar, Avx2, Neon };

struct DecayScan {
  std::size_t violations = 0;
  /// max over i of D+V_i + rate*(V_i + V_{i+1})/2 - tol*(1 + V_i); -inf when n < 2.
  double worst_excess = 0.0;
};

struct KernelTable {
  Backend backend;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*max_abs)(const double* a, std::size_t n);
  DecayScan (*decay_scan)(const double* v, std::size_t n, double inv_h, double rate,
                          double tol);
};

std::string_view backend_name(Backend b) noexcept;

/// True when the backend was compiled in and the CPU supports it.
bool backend_available(Backend b) noexcept;

/// Table for a specific backend; falls back to scalar when unavailable.
const KernelTable& kernels_for(Backend b) noexcept;

/// Currently selected table. The first call picks the best available backend,
/// unless RATSTAB_SIMD=scalar is set in the environment.
const KernelTable& active() noexcept;

/// Override the runtime choice (tests, benchmarking). Returns false and leaves
/// the selection untouched if `b` is unavailable.
bool select_backend(Backend b) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

inline double max_abs(std::span<const double> a) { return active().max_abs(a.data(), a.size()); }

inline DecayScan decay_scan(std::span<const double> v, double inv_h, double rate, double tol) {
  return active().decay_scan(v.data(), v.size(), inv_h, rate, tol);
}

namespace detail {
// Per-backend entry points; defined in the matching translation unit.
const KernelTable& scalar_table() noexcept;
#if defined(RATSTAB_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif
#if defined(RATSTAB_HAVE_NEON)
const KernelTable& neon_table() noexcept;
#endif
}  // namespace detail

}  // namespace ratstab::simd
