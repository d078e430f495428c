#pragma once

// Arithmetic expression language used to describe nonlinearity components
// and initial histories in configuration files.
//
// Grammar, lowest to highest precedence:
//
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := atom ('^' unary)?              right associative
//   atom    := number | variable | func '(' sum ')' | '(' sum ')'
//
// Variables: x<i>, xd<i> (i >= 1), u, t. Functions: sin cos tan tanh exp ln sqrt abs.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ratstab::expr {

enum class Func { Sin, Cos, Tan, Tanh, Exp, Ln, Sqrt, Abs };
enum class BinOp { Add, Sub, Mul, Div, Pow };

std::string_view func_name(Func f) noexcept;
std::optional<Func> func_from_name(std::string_view name) noexcept;
char binop_symbol(BinOp op) noexcept;

class Expr;

struct Number {
  double value;
};
struct Variable {
  std::string name;
};
struct Negate {
  std::shared_ptr<const Expr> operand;
};
struct Call {
  Func func;
  std::shared_ptr<const Expr> arg;
};
struct Binary {
  BinOp op;
  std::shared_ptr<const Expr> lhs;
  std::shared_ptr<const Expr> rhs;
};

/// Immutable expression tree. Copies share structure.
class Expr {
 public:
  using Node = std::variant<Number, Variable, Negate, Call, Binary>;

  explicit Expr(Node node) : node_(std::move(node)) {}

  static Expr number(double v) { return Expr(Number{v}); }
  static Expr variable(std::string name) { return Expr(Variable{std::move(name)}); }
  static Expr negate(Expr e) { return Expr(Negate{std::make_shared<const Expr>(std::move(e))}); }
  static Expr call(Func f, Expr e) { return Expr(Call{f, std::make_shared<const Expr>(std::move(e))}); }
  static Expr binary(BinOp op, Expr l, Expr r) {
    return Expr(Binary{op, std::make_shared<const Expr>(std::move(l)),
                       std::make_shared<const Expr>(std::move(r))});
  }

  const Node& node() const noexcept { return node_; }

 private:
  Node node_;
};

/// Structural equality (numbers compared bitwise-equal as doubles).
bool operator==(const Expr& a, const Expr& b);

/// Throws ParseError carrying the byte offset of the offending token.
Expr parse(std::string_view text);

/// Fully parenthesised text that parses back to a structurally identical tree.
std::string print(const Expr& e);

using Environment = std::map<std::string, double, std::less<>>;

/// IEEE evaluation. Non-finite results are returned as-is. Throws EvalError
/// for an unbound variable.
double eval(const Expr& e, const Environment& env);

std::set<std::string> free_vars(const Expr& e);

/// True for names the grammar accepts as variables (x<i>, xd<i>, u, t).
bool is_variable_name(std::string_view name) noexcept;

/// Flattened postfix form bound to a fixed slot layout, for inner loops.
class Program {
 public:
  using SlotResolver = std::function<std::optional<std::size_t>(std::string_view)>;

  /// Throws EvalError if a variable has no slot.
  static Program compile(const Expr& e, const SlotResolver& resolve);

  double run(std::span<const double> slots) const;

 private:
  enum class Op : unsigned char { Push, Load, Neg, Call, Add, Sub, Mul, Div, Pow };
  struct Instr {
    Op op;
    unsigned char func = 0;
    std::size_t slot = 0;
    double value = 0.0;
  };
  void emit(const Expr& e, const SlotResolver& resolve, std::size_t depth);

  std::vector<Instr> code_;
  std::size_t max_stack_ = 0;
};

}  // namespace ratstab::expr
