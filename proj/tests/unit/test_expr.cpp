#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "ratstab/error.hpp"
#include "ratstab/expr.hpp"
#include "ratstab/sysmodel.hpp"

using namespace ratstab;
using namespace ratstab::expr;
using Catch::Approx;

namespace {

double eval_text(std::string_view text, const Environment& env = {}) { return eval(parse(text), env); }

Expr random_tree(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 4);
  std::uniform_real_distribution<double> val(0.0, 100.0);
  static const char* vars[] = {"x1", "x2", "xd1", "xd2", "u", "t"};
  switch (pick(rng)) {
    case 0:
      // Non-negative literals only: the grammar spells negatives as negation.
      return Expr::number(std::uniform_int_distribution<int>(0, 3)(rng) == 0 ? std::floor(val(rng))
                                                                              : val(rng));
    case 1:
      return Expr::variable(vars[std::uniform_int_distribution<int>(0, 5)(rng)]);
    case 2:
      return Expr::negate(random_tree(rng, depth - 1));
    case 3:
      return Expr::call(static_cast<Func>(std::uniform_int_distribution<int>(0, 7)(rng)),
                        random_tree(rng, depth - 1));
    default:
      return Expr::binary(static_cast<BinOp>(std::uniform_int_distribution<int>(0, 4)(rng)),
                          random_tree(rng, depth - 1), random_tree(rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("precedence and associativity goldens", "[expr]") {
  CHECK(eval_text("1+2*3") == 7);
  CHECK(eval_text("2^3^2") == 512);
  CHECK(eval_text("(1+2)*3") == 9);
  CHECK(eval_text("-2^2") == -4);
  CHECK(eval_text("2^-1") == 0.5);
  CHECK(eval_text("8/4/2") == 1);
  CHECK(eval_text("10-4-3") == 3);
  CHECK(eval_text("--3") == 3);
  CHECK(eval_text("1.5e2 + .5") == 150.5);
  CHECK(eval_text("sqrt(16) + abs(-2) + exp(0) + ln(1)") == 7);
  CHECK(eval_text("tanh(0) + sin(0) + tan(0) + cos(0)") == 1);
}

TEST_CASE("variables and environments", "[expr]") {
  const Environment env{{"x1", 2.0}, {"xd1", 3.0}, {"u", 0.0}, {"t", 1.0}};
  CHECK(eval_text("x1*xd1 + u + t", env) == 7);
  CHECK_THROWS_AS(eval_text("x2", env), EvalError);
  CHECK(free_vars(parse("x1 + sin(xd12) * u")) == std::set<std::string>{"u", "x1", "xd12"});
  CHECK(is_variable_name("x1"));
  CHECK(is_variable_name("xd10"));
  CHECK_FALSE(is_variable_name("x0"));
  CHECK_FALSE(is_variable_name("x01"));
  CHECK_FALSE(is_variable_name("y"));
  CHECK_FALSE(is_variable_name("xd"));
}

TEST_CASE("parse errors carry offsets", "[expr]") {
  try {
    parse("x1+*2");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 3);
  }
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("(1+2"), ParseError);
  CHECK_THROWS_AS(parse("1+2)"), ParseError);
  CHECK_THROWS_AS(parse("foo(1)"), ParseError);
  CHECK_THROWS_AS(parse("y + 1"), ParseError);
  CHECK_THROWS_AS(parse("1 $ 2"), ParseError);
  CHECK_THROWS_AS(parse(std::string(10000, '(') + "1" + std::string(10000, ')')), ParseError);
}

TEST_CASE("IEEE semantics are preserved", "[expr]") {
  CHECK(std::isinf(eval_text("1/0")));
  CHECK(std::isnan(eval_text("ln(-1)")));
  CHECK(std::isnan(eval_text("sqrt(-1)")));
}

TEST_CASE("print then parse is the identity on random trees", "[expr][property]") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const Expr e = random_tree(rng, 6);
    const std::string text = print(e);
    INFO(text);
    const Expr back = parse(text);
    REQUIRE(back == e);
    REQUIRE(print(back) == text);
  }
}

TEST_CASE("compiled programs match tree evaluation", "[expr][property]") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-3, 3);
  const auto resolve = [](std::string_view n) -> std::optional<std::size_t> {
    if (n == "x1") return 0;
    if (n == "x2") return 1;
    if (n == "xd1") return 2;
    if (n == "xd2") return 3;
    if (n == "u") return 4;
    if (n == "t") return 5;
    return std::nullopt;
  };
  for (int i = 0; i < 500; ++i) {
    const Expr e = random_tree(rng, 7);
    const Program p = Program::compile(e, resolve);
    double slots[6];
    for (double& s : slots) s = u(rng);
    const Environment env{{"x1", slots[0]}, {"x2", slots[1]}, {"xd1", slots[2]},
                          {"xd2", slots[3]}, {"u", slots[4]},  {"t", slots[5]}};
    const double a = eval(e, env), b = p.run(slots);
    INFO(print(e));
    if (std::isnan(a))
      CHECK(std::isnan(b));
    else
      CHECK(a == b);
  }
  CHECK_THROWS_AS(Program::compile(parse("x3"), resolve), EvalError);
}

TEST_CASE("expression nonlinearity equals the built-in example", "[expr]") {
  const Nonlinearity builtin = make_nonlinearity("paper_example", 2);
  const std::vector<std::string> exprs{"x1*cos(x1) + xd1*cos(u)", "0"};
  const Nonlinearity parsed = make_nonlinearity(exprs);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 1000; ++i) {
    const Vector x{u(rng), u(rng)}, xd{u(rng), u(rng)};
    const double in = u(rng);
    const Vector a = builtin(x, xd, in), b = parsed(x, xd, in);
    REQUIRE(std::fabs(a[0] - b[0]) <= 1e-15 * std::max(1.0, std::fabs(a[0])));
    REQUIRE(b[1] == 0.0);
  }
  const Vector v = builtin(Vector{std::numbers::pi, 0}, Vector{2, 0}, 0.0);
  CHECK(v[0] == Approx(-1.1415926535897931).margin(1e-15));
}

TEST_CASE("fuzzing the parser never crashes", "[expr][fuzz]") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "0123456789.eE+-*/^() xdutsincoqrablnh\t\n,;$#";
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<std::size_t> len(0, 4096);
  std::size_t accepted = 0;
  for (int i = 0; i < 400; ++i) {
    std::string s(len(rng), '\0');
    const bool raw = i % 2 == 0;
    for (char& c : s) c = raw ? static_cast<char>(byte(rng)) : alphabet[pick(rng)];
    try {
      const Expr e = parse(s);
      ++accepted;
      (void)print(e);
    } catch (const ParseError&) {
    }
  }
  // Mutations of a valid expression exercise deeper parser paths.
  const std::string base = "x1*cos(x1) + xd1*cos(u) - 2^(3^-1) / (1 + tanh(t))";
  for (int i = 0; i < 2000; ++i) {
    std::string s = base;
    for (int k = 0; k < 3; ++k) s[std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng)] = alphabet[pick(rng)];
    try {
      (void)parse(s);
      ++accepted;
    } catch (const ParseError&) {
    }
  }
  CHECK(accepted > 0);
}
