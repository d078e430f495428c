#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ratstab/certify.hpp"
#include "ratstab/error.hpp"

using namespace ratstab;
using Catch::Approx;

namespace {
constexpr double kNormP = 1.2859695961292072;
constexpr double kNormS = 1.0169445216049322;
}  // namespace

TEST_CASE("margins from the direct formula", "[certify]") {
  const MarginPair ab = observer_conditions(8.0, 1.0, 1.0682, 0.5);
  CHECK(ab.first == Approx(1.2870702725888).margin(1e-12));
  CHECK(ab.second == Approx(0.8801135623730951).margin(1e-12));
  const MarginPair cd = feedback_conditions(8.0, 1.0, 1.0169, 0.5);
  CHECK(cd.first == Approx(1.4173579481328873).margin(1e-12));
  CHECK(cd.second == Approx(0.9057635623730952).margin(1e-12));
  CHECK(output_feedback_condition(8.0, 1.0, 1.0169, 1.0) == Approx(-0.10799205186711269).margin(1e-12));
  // theta = 1 removes the logarithmic delay term.
  CHECK(observer_conditions(1.0, 0.3, 2.0, 0.0).first == 0.5);
}

TEST_CASE("condition report flags", "[certify]") {
  const ConditionReport r = evaluate_conditions(8.0, 1.0, 1.0682, 1.0169, 0.5);
  CHECK(r.all_four_ok());
  CHECK(r.of_ok);
  const ConditionReport bad = evaluate_conditions(8.0, 1.0, 1.0682, 1.0169, 2.0);
  CHECK_FALSE(bad.a_ok);
  CHECK_FALSE(bad.observer_ok());
  CHECK_FALSE(bad.all_four_ok());
}

TEST_CASE("margins are monotone in k and in the norm", "[certify][property]") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> th(1.0, 200.0), tau(0.05, 5.0), nrm(0.01, 10.0), k(0.0, 3.0),
      dk(1e-6, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = th(rng), ta = tau(rng), n = nrm(rng), k1 = k(rng), k2 = k1 + dk(rng);
    const MarginPair m1 = observer_conditions(t, ta, n, k1);
    const MarginPair m2 = observer_conditions(t, ta, n, k2);
    REQUIRE(m2.first < m1.first);
    REQUIRE(m2.second < m1.second);
    const MarginPair m3 = observer_conditions(t, ta, n * 1.1, k1);
    REQUIRE(m3.first <= m1.first);
    REQUIRE(m3.second <= m1.second);
  }
}

TEST_CASE("theta synthesis", "[certify]") {
  CHECK(find_theta_min(1.0, kNormP, kNormS, 0.0, 100.0, 1e-6) == 1.0);
  const double t = find_theta_min(1.0, 1.28596, 1.01694, 0.5, 100.0, 1e-6);
  CHECK(t == Approx(6.21).margin(0.01));
  CHECK(evaluate_conditions(t, 1.0, 1.28596, 1.01694, 0.5).all_four_ok());
  CHECK_FALSE(evaluate_conditions(t - 1e-5, 1.0, 1.28596, 1.01694, 0.5).all_four_ok());
  CHECK_THROWS_AS(find_theta_min(1.0, kNormP, kNormS, 5.0, 100.0, 1e-6), NoFeasibleTheta);
  // b(theta) = 0 at theta = (2 k |P|)^2 = 165.37 for k = 5.
  const double beyond = find_theta_min(1.0, kNormP, kNormS, 5.0, 200.0, 1e-6);
  CHECK(beyond == Approx(std::pow(2 * 5 * kNormP, 2)).margin(1e-4));
  CHECK_THROWS_AS(find_theta_min(1.0, kNormP, kNormS, 0.5, 1.0, 1e-6), ConfigError);
}

TEST_CASE("alpha selection", "[certify]") {
  const MarginPair ab = observer_conditions(8.0, 1.0, 1.0682, 0.5);
  const MarginPair cd = feedback_conditions(8.0, 1.0, 1.0169, 0.5);
  const AlphaChoice ob = select_alpha_observer_based(8.0, ab.first, cd.first, 1.0169, std::sqrt(1800.0), 0.1);
  CHECK(ob.threshold == Approx(130604.20695).epsilon(1e-9));
  CHECK(ob.alpha == Approx(1.1 * ob.threshold));
  CHECK(ob.alpha * ab.first - 2 * 64 * 1.0169 * 1.0169 * 1800 / cd.first > 0);
  CHECK_THROWS_AS(select_alpha_observer_based(8.0, -1.0, 1.0, 1.0, 1.0, 0.1), ConditionsNotSatisfied);

  const AlphaChoice of = select_alpha_output_feedback(cd.first, cd.second, 0.5, 1.0682, 0.1);
  CHECK(of.alpha == Approx(1.5262819811566852).epsilon(1e-12));
  CHECK(of.alpha < of.threshold);
  const AlphaChoice free = select_alpha_output_feedback(cd.first, cd.second, 0.0, 1.0682, 0.1);
  CHECK(free.unconstrained);
  CHECK_THROWS_AS(select_alpha_output_feedback(cd.first, cd.second, 0.5, 1.0682, 1.5), ConfigError);
}

TEST_CASE("rational bound goldens", "[certify]") {
  const StabilityParams p = StabilityParams::from_sandwich(1, 1, 1, 2, 2, 1);
  CHECK(rational_bound(p, 1.0, 0.0) == Approx(1.0).margin(1e-15));
  CHECK(rational_bound(p, 1.0, 3.0) == Approx(0.5).margin(1e-15));
  CHECK(std::fabs(rational_bound(p, 1.0, 100.0) / rational_bound(p, 1.0, 400.0) - 2.0) <= 1e-12);
  CHECK(rational_bound(p, 0.0, 5.0) == 0.0);
  CHECK(p.M == 1.0);
  CHECK(p.e == 1.0);
  CHECK_THROWS_AS(StabilityParams::from_sandwich(0, 1, 1, 2, 2, 1), PreconditionViolated);
  CHECK_THROWS_AS(rational_bound(p, 1.0, -1.0), PreconditionViolated);
}

TEST_CASE("rational bound is decreasing in t and increasing in the initial norm", "[certify][property]") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(0.1, 5.0), r(0.5, 4.0), t(0.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const StabilityParams p =
        StabilityParams::from_sandwich(pos(rng), pos(rng) + 5.0, pos(rng), r(rng), r(rng), pos(rng));
    const double phi = pos(rng), t1 = t(rng), t2 = t1 + pos(rng);
    REQUIRE(rational_bound(p, phi, t2) < rational_bound(p, phi, t1));
    REQUIRE(rational_bound(p, phi * 1.5, t1) >= rational_bound(p, phi, t1));
    // Sandwich consistency at t = 0: bound equals M |phi|^e.
    REQUIRE(rational_bound(p, phi, 0.0) == Approx(p.M * std::pow(phi, p.e)).epsilon(1e-12));
  }
}

TEST_CASE("corollary exponent conversion", "[certify]") {
  CHECK(corollary_k(2.0, 4.0) == 1.0);
  CHECK(corollary_k(2.0, 3.0) == 0.5);
  CHECK_THROWS_AS(corollary_k(2.0, 2.0), PreconditionViolated);
  CHECK_THROWS_AS(corollary_k(0.0, 2.0), PreconditionViolated);
  const StabilityParams p = StabilityParams::from_corollary(1.0, 4.0, 2.0, 2.0, 2.0, 4.0);
  CHECK(p.k == 1.0);
  CHECK(p.lambda3 == Approx(2.0 / 16.0));
  REQUIRE(p.r3.has_value());
  CHECK(*p.r3 == 4.0);
}

TEST_CASE("krasovskii functional on a constant history", "[certify]") {
  // z = e1 on [t - 1, t], theta = 4, M = I: 1 + 2 * (2 / ln 4) * (1 - 4^-1/2).
  const FunctionalSpec spec{Matrix::identity(2), 4.0, 1.0};
  const double h = 1e-3;
  const std::size_t m = 1000;
  Vector hist(2 * (m + 1), 0.0);
  for (std::size_t j = 0; j <= m; ++j) hist[2 * j] = 1.0;
  const double v = krasovskii_value(spec, hist, h);
  CHECK(std::fabs(v - 2.4426950408889634) <= 1e-6);

  hist[10] = std::nan("");
  CHECK_THROWS_AS(krasovskii_value(spec, hist, h), ContractViolation);
  hist.pop_back();
  CHECK_THROWS_AS(krasovskii_value(spec, hist, h), ContractViolation);
  const FunctionalSpec indefinite{Matrix{{1, 0}, {0, -1}}, 4.0, 1.0};
  Vector ok(2 * (m + 1), 1.0);
  CHECK_THROWS_AS(krasovskii_value(indefinite, ok, h), ContractViolation);
}

TEST_CASE("krasovskii trapezoid error is second order", "[certify]") {
  // z(s) = (cos s, sin 2s) over [0, 1]; the integral weight is smooth so the
  // trapezoid error ratio between h and h/2 approaches 4.
  const FunctionalSpec spec{Matrix{{2, 0.5}, {0.5, 1}}, 3.0, 1.0};
  const auto value = [&](std::size_t m) {
    const double h = 1.0 / double(m);
    Vector hist(2 * (m + 1));
    for (std::size_t j = 0; j <= m; ++j) {
      const double s = double(j) * h;
      hist[2 * j] = std::cos(s);
      hist[2 * j + 1] = std::sin(2 * s);
    }
    return krasovskii_value(spec, hist, h);
  };
  const double fine = value(12800);
  const double e1 = value(100) - fine, e2 = value(200) - fine;
  const double ratio = e1 / e2;
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

TEST_CASE("functional series matches pointwise evaluation and the sandwich", "[certify][property]") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0, 1);
  const FunctionalSpec spec{Matrix{{1.5, 0.2}, {0.2, 0.7}}, 5.0, 0.5};
  const double h = 0.01;
  const std::size_t m = 50, rows = 400;
  Vector series(2 * rows);
  for (double& v : series) v = g(rng);
  const Vector vs = krasovskii_series(spec, series, 2, h);
  REQUIRE(vs.size() == rows - m);
  const SandwichBounds sb = functional_bounds(spec);
  for (std::size_t i = m; i < rows; i += 37) {
    const std::span<const double> window(series.data() + 2 * (i - m), 2 * (m + 1));
    CHECK(vs[i - m] == Approx(krasovskii_value(spec, window, h)).epsilon(1e-13));
  }
  for (std::size_t i = m; i < rows; ++i) {
    const double* z = series.data() + 2 * i;
    const double zz = z[0] * z[0] + z[1] * z[1];
    double sup = 0.0;
    for (std::size_t j = i - m; j <= i; ++j)
      sup = std::max(sup, series[2 * j] * series[2 * j] + series[2 * j + 1] * series[2 * j + 1]);
    REQUIRE(vs[i - m] >= sb.lower * zz * (1 - 1e-12));
    REQUIRE(vs[i - m] <= sb.upper * sup * (1 + 1e-12));
  }
}
