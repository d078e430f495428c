#include <atomic>
#include <cstdlib>
#include <string_view>

#include "ratstab/simd/kernels.hpp"

namespace ratstab::simd {
namespace {

bool cpu_supports(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(RATSTAB_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(RATSTAB_HAVE_NEON)
      return true;  // baseline on AArch64
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* pick_default() noexcept {
  if (const char* env = std::getenv("RATSTAB_SIMD"); env && std::string_view(env) == "scalar")
    return &detail::scalar_table();
  if (cpu_supports(Backend::Avx2)) return &kernels_for(Backend::Avx2);
  if (cpu_supports(Backend::Neon)) return &kernels_for(Backend::Neon);
  return &detail::scalar_table();
}

std::atomic<const KernelTable*>& slot() noexcept {
  static std::atomic<const KernelTable*> current{pick_default()};
  return current;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

bool backend_available(Backend b) noexcept { return cpu_supports(b); }

const KernelTable& kernels_for(Backend b) noexcept {
  if (!cpu_supports(b)) return detail::scalar_table();
  switch (b) {
#if defined(RATSTAB_HAVE_AVX2)
    case Backend::Avx2:
      return detail::avx2_table();
#endif
#if defined(RATSTAB_HAVE_NEON)
    case Backend::Neon:
      return detail::neon_table();
#endif
    default:
      return detail::scalar_table();
  }
}

const KernelTable& active() noexcept { return *slot().load(std::memory_order_acquire); }

bool select_backend(Backend b) noexcept {
  if (!cpu_supports(b)) return false;
  slot().store(&kernels_for(b), std::memory_order_release);
  return true;
}

}  // namespace ratstab::simd
