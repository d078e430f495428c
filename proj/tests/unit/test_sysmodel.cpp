#include <catch_amalgamated.hpp>

#include <cmath>

#include "ratstab/error.hpp"
#include "ratstab/sysmodel.hpp"

using namespace ratstab;
using Catch::Approx;

TEST_CASE("registry nonlinearities", "[sysmodel]") {
  CHECK(registry_names() == std::vector<std::string>{"zero", "paper_example"});
  const Nonlinearity z = make_nonlinearity("zero", 3);
  CHECK(z(Vector{1, 2, 3}, Vector{4, 5, 6}, 7.0) == Vector{0, 0, 0});
  CHECK_THROWS_AS(make_nonlinearity("nope", 2), ValidationError);
  CHECK_NOTHROW(probe_triangularity(make_nonlinearity("paper_example", 2)));
}

TEST_CASE("expression nonlinearities are checked for triangularity", "[sysmodel]") {
  const std::vector<std::string> ok{"sin(x1)", "x1*x2 + xd2"};
  CHECK_NOTHROW(make_nonlinearity(ok));
  const std::vector<std::string> bad{"x2", "0"};
  try {
    make_nonlinearity(bad);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("x2") != std::string::npos);
  }
  const std::vector<std::string> bad_delayed{"xd2", "0"};
  CHECK_THROWS_AS(make_nonlinearity(bad_delayed), ValidationError);
  const std::vector<std::string> time_varying{"t*x1", "0"};
  CHECK_THROWS_AS(make_nonlinearity(time_varying), ValidationError);
  const std::vector<std::string> syntax{"x1 +", "0"};
  CHECK_THROWS_AS(make_nonlinearity(syntax), ParseError);
}

TEST_CASE("system spec validation", "[sysmodel]") {
  const auto f = make_nonlinearity("paper_example", 2);
  CHECK_NOTHROW(SystemSpec(2, 1.0, f, 0.5, DomainBox{}));
  CHECK_THROWS_AS(SystemSpec(2, 0.0, f, 0.5, DomainBox{}), ConfigError);
  CHECK_THROWS_AS(SystemSpec(2, 1.0, f, -1.0, DomainBox{}), ConfigError);
  CHECK_THROWS_AS(SystemSpec(3, 1.0, f, 0.5, DomainBox{}), ConfigError);
  const std::vector<std::string> offset{"x1 + 1", "0"};
  CHECK_THROWS_AS(SystemSpec(2, 1.0, make_nonlinearity(offset), 0.5, DomainBox{}), ValidationError);
  const SystemSpec s(2, 1.0, f, 0.5, DomainBox{});
  CHECK(s.box().x.size() == 2);
  CHECK(s.companion().A == build_companion(2).A);
}

TEST_CASE("gain scaling and Hurwitz validation", "[sysmodel]") {
  const ScaledGains g = scale_gains(Vector{-14, -28}, Vector{-30, -30}, 8.0);
  CHECK(g.L == Vector{-14 * 8.0, -28 * 64.0});
  CHECK(g.K == Vector{-30 * 64.0, -30 * 8.0});
  CHECK_THROWS_AS(scale_gains(Vector{1}, Vector{1}, 0.0), ConfigError);

  const GainSet gs(Vector{-14, -28}, Vector{-30, -30}, 8.0);
  CHECK(gs.A_L() == Matrix{{-14, 1}, {-28, 0}});
  CHECK(gs.A_K() == Matrix{{0, 1}, {-30, -30}});
  CHECK_THROWS_AS(GainSet(Vector{-14, -28}, Vector{0, 0}, 8.0), NotHurwitz);
  CHECK_THROWS_AS(GainSet(Vector{1, -28}, Vector{-30, -30}, 8.0), NotHurwitz);
  CHECK_THROWS_AS(GainSet(Vector{-14, std::nan("")}, Vector{-30, -30}, 8.0), ConfigError);
}

TEST_CASE("lipschitz estimate", "[sysmodel]") {
  // Linear f1 = 2 x1 - 3 xd1: per-argument constants 2 and 3.
  const std::vector<std::string> lin{"2*x1 - 3*xd1", "0"};
  const double k = estimate_lipschitz(make_nonlinearity(lin), DomainBox::symmetric(2, 5.0), 2000, 0);
  CHECK(k == Approx(3.0).epsilon(1e-6));
  // Example over |x| <= 20: max |cos x - x sin x| = 17.85 at the boundary.
  const double kp = estimate_lipschitz(make_nonlinearity("paper_example", 2),
                                       DomainBox::symmetric(2, 20.0), 5000, 0);
  CHECK(kp == Approx(17.8508).epsilon(2e-3));
  CHECK(kp <= 17.8508 * (1 + 1e-6));
  // Deterministic in the seed.
  CHECK(kp == estimate_lipschitz(make_nonlinearity("paper_example", 2),
                                 DomainBox::symmetric(2, 20.0), 5000, 0));
  CHECK(estimate_lipschitz(make_nonlinearity("zero", 2), DomainBox::symmetric(2, 1.0), 100, 1) == 0.0);
}
