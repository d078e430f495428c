#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "ratstab/simd/kernels.hpp"

using namespace ratstab::simd;
using Catch::Approx;

namespace {

std::vector<Backend> available_vector_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::Avx2, Backend::Neon})
    if (backend_available(b)) out.push_back(b);
  return out;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("scalar backend is always available", "[simd]") {
  CHECK(backend_available(Backend::Scalar));
  CHECK(kernels_for(Backend::Scalar).backend == Backend::Scalar);
  CHECK(backend_name(Backend::Scalar) == "scalar");
}

TEST_CASE("vector kernels agree with the scalar reference", "[simd][equivalence]") {
  const KernelTable& ref = kernels_for(Backend::Scalar);
  const auto backends = available_vector_backends();
  if (backends.empty()) SUCCEED("no vector backend on this machine");
  std::mt19937_64 rng(5);
  for (Backend b : backends) {
    const KernelTable& k = kernels_for(b);
    REQUIRE(k.backend == b);
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 100u, 1001u}) {
      INFO(backend_name(b) << " n = " << n);
      const auto a = random_vector(rng, n);
      const auto c = random_vector(rng, n);
      double scale = 0.0;
      for (std::size_t i = 0; i < n; ++i) scale += std::fabs(a[i] * c[i]);
      CHECK(std::fabs(k.dot(a.data(), c.data(), n) - ref.dot(a.data(), c.data(), n)) <=
            1e-14 * (scale + 1.0));

      auto y1 = c, y2 = c;
      k.axpy(1.75, a.data(), y1.data(), n);
      ref.axpy(1.75, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == Approx(y2[i]).margin(1e-14));

      CHECK(k.max_abs(a.data(), n) == ref.max_abs(a.data(), n));

      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = std::exp(-0.01 * double(i)) * (1.0 + 0.01 * a[i]);
      const DecayScan s1 = k.decay_scan(v.data(), n, 100.0, 1.0, 1e-3);
      const DecayScan s2 = ref.decay_scan(v.data(), n, 100.0, 1.0, 1e-3);
      CHECK(s1.violations == s2.violations);
      if (n >= 2) CHECK(s1.worst_excess == s2.worst_excess);
    }
  }
}

TEST_CASE("kernels on known values", "[simd]") {
  for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
    if (!backend_available(b)) continue;
    const KernelTable& k = kernels_for(b);
    const double a[] = {1, 2, 3, 4, 5, 6, 7};
    const double c[] = {1, 1, 1, 1, 1, 1, 1};
    CHECK(k.dot(a, c, 7) == 28);
    CHECK(k.max_abs(a, 7) == 7);
    const double neg[] = {-9, 2, 3};
    CHECK(k.max_abs(neg, 3) == 9);
    // v = 1, 0.5, 0.25 with rate 1, h 1: -0.5 + 0.75 = 0.25 and -0.25 + 0.375 = 0.125.
    const double v[] = {1, 0.5, 0.25};
    const DecayScan s = k.decay_scan(v, 3, 1.0, 1.0, 0.0);
    CHECK(s.violations == 2);
    CHECK(s.worst_excess == Approx(0.25));
  }
}

TEST_CASE("backend selection round trip", "[simd]") {
  const Backend before = active().backend;
  CHECK(select_backend(Backend::Scalar));
  CHECK(active().backend == Backend::Scalar);
  CHECK(select_backend(before));
  CHECK(active().backend == before);
}
