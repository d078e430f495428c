#include "ratstab/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fmt/format.h>

#include "ratstab/error.hpp"

namespace ratstab::expr {
namespace {

constexpr std::array<std::string_view, 8> kFuncNames = {"sin",  "cos", "tan",  "tanh",
                                                        "exp",  "ln",  "sqrt", "abs"};

// Guards against stack exhaustion on adversarial input like "((((...".
constexpr std::size_t kMaxDepth = 256;

bool digits_only(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

double apply(Func f, double x) {
  switch (f) {
    case Func::Sin:
      return std::sin(x);
    case Func::Cos:
      return std::cos(x);
    case Func::Tan:
      return std::tan(x);
    case Func::Tanh:
      return std::tanh(x);
    case Func::Exp:
      return std::exp(x);
    case Func::Ln:
      return std::log(x);
    case Func::Sqrt:
      return std::sqrt(x);
    case Func::Abs:
      return std::fabs(x);
  }
  return std::nan("");
}

double apply(BinOp op, double a, double b) {
  switch (op) {
    case BinOp::Add:
      return a + b;
    case BinOp::Sub:
      return a - b;
    case BinOp::Mul:
      return a * b;
    case BinOp::Div:
      return a / b;
    case BinOp::Pow:
      return std::pow(a, b);
  }
  return std::nan("");
}

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
  Tok kind;
  std::size_t offset;
  std::string_view text;
  double number = 0.0;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) { advance(); }

  Expr parse_all() {
    Expr e = sum(0);
    if (tok_.kind != Tok::End) fail("unexpected '" + std::string(tok_.text) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, tok_.offset); }

  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    if (pos_ >= src_.size()) {
      tok_ = {Tok::End, start, {}};
      return;
    }
    const char c = src_[pos_];
    auto single = [&](Tok k) {
      ++pos_;
      tok_ = {k, start, src_.substr(start, 1)};
    };
    switch (c) {
      case '+':
        return single(Tok::Plus);
      case '-':
        return single(Tok::Minus);
      case '*':
        return single(Tok::Star);
      case '/':
        return single(Tok::Slash);
      case '^':
        return single(Tok::Caret);
      case '(':
        return single(Tok::LParen);
      case ')':
        return single(Tok::RParen);
      default:
        break;
    }
    const auto is_digit = [&](std::size_t i) {
      return i < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i]));
    };
    if (is_digit(pos_) || (c == '.' && is_digit(pos_ + 1))) {
      std::size_t end = pos_;
      while (is_digit(end)) ++end;
      if (end < src_.size() && src_[end] == '.') {
        ++end;
        while (is_digit(end)) ++end;
      }
      if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
        std::size_t k = end + 1;
        if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
        if (is_digit(k)) {
          while (is_digit(k)) ++k;
          end = k;
        }
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + end, v);
      if (ec == std::errc::result_out_of_range) {
        v = HUGE_VAL;
      } else if (ec != std::errc() || ptr != src_.data() + end) {
        tok_ = {Tok::Number, start, src_.substr(start, end - start)};
        fail("malformed number");
      }
      pos_ = end;
      tok_ = {Tok::Number, start, src_.substr(start, end - start), v};
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_'))
        ++end;
      pos_ = end;
      tok_ = {Tok::Ident, start, src_.substr(start, end - start)};
      return;
    }
    tok_ = {Tok::End, start, src_.substr(start, 1)};
    fail(fmt::format("unexpected character 0x{:02x}", static_cast<unsigned char>(c)));
  }

  void enter(std::size_t depth) const {
    if (depth > kMaxDepth) fail("expression nested too deeply");
  }

  Expr sum(std::size_t depth) {
    enter(depth);
    Expr lhs = product(depth + 1);
    while (tok_.kind == Tok::Plus || tok_.kind == Tok::Minus) {
      const BinOp op = tok_.kind == Tok::Plus ? BinOp::Add : BinOp::Sub;
      advance();
      lhs = Expr::binary(op, std::move(lhs), product(depth + 1));
    }
    return lhs;
  }

  Expr product(std::size_t depth) {
    Expr lhs = unary(depth + 1);
    while (tok_.kind == Tok::Star || tok_.kind == Tok::Slash) {
      const BinOp op = tok_.kind == Tok::Star ? BinOp::Mul : BinOp::Div;
      advance();
      lhs = Expr::binary(op, std::move(lhs), unary(depth + 1));
    }
    return lhs;
  }

  Expr unary(std::size_t depth) {
    enter(depth);
    if (tok_.kind == Tok::Minus) {
      advance();
      return Expr::negate(unary(depth + 1));
    }
    return power(depth + 1);
  }

  Expr power(std::size_t depth) {
    Expr base = atom(depth + 1);
    if (tok_.kind == Tok::Caret) {
      advance();
      return Expr::binary(BinOp::Pow, std::move(base), unary(depth + 1));
    }
    return base;
  }

  Expr atom(std::size_t depth) {
    enter(depth);
    switch (tok_.kind) {
      case Tok::Number: {
        const double v = tok_.number;
        advance();
        return Expr::number(v);
      }
      case Tok::LParen: {
        advance();
        Expr inner = sum(depth + 1);
        if (tok_.kind != Tok::RParen) fail("expected ')'");
        advance();
        return inner;
      }
      case Tok::Ident: {
        const Token id = tok_;
        advance();
        if (tok_.kind == Tok::LParen) {
          const auto f = func_from_name(id.text);
          if (!f) throw ParseError("unknown function '" + std::string(id.text) + "'", id.offset);
          advance();
          Expr arg = sum(depth + 1);
          if (tok_.kind != Tok::RParen) fail("expected ')'");
          advance();
          return Expr::call(*f, std::move(arg));
        }
        if (!is_variable_name(id.text))
          throw ParseError("unknown identifier '" + std::string(id.text) + "'", id.offset);
        return Expr::variable(std::string(id.text));
      }
      case Tok::End:
        fail("unexpected end of input");
      default:
        fail("unexpected '" + std::string(tok_.text) + "'");
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token tok_{Tok::End, 0, {}};
};

void print_into(const Expr& e, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Number>) {
          out += fmt::format("{:.17g}", n.value);
        } else if constexpr (std::is_same_v<T, Variable>) {
          out += n.name;
        } else if constexpr (std::is_same_v<T, Negate>) {
          out += "(-";
          print_into(*n.operand, out);
          out += ')';
        } else if constexpr (std::is_same_v<T, Call>) {
          out += func_name(n.func);
          out += '(';
          print_into(*n.arg, out);
          out += ')';
        } else {
          out += '(';
          print_into(*n.lhs, out);
          out += binop_symbol(n.op);
          print_into(*n.rhs, out);
          out += ')';
        }
      },
      e.node());
}

void collect(const Expr& e, std::set<std::string>& vars) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Variable>) {
          vars.insert(n.name);
        } else if constexpr (std::is_same_v<T, Negate>) {
          collect(*n.operand, vars);
        } else if constexpr (std::is_same_v<T, Call>) {
          collect(*n.arg, vars);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect(*n.lhs, vars);
          collect(*n.rhs, vars);
        }
      },
      e.node());
}

}  // namespace

std::string_view func_name(Func f) noexcept { return kFuncNames[static_cast<std::size_t>(f)]; }

std::optional<Func> func_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kFuncNames.size(); ++i)
    if (kFuncNames[i] == name) return static_cast<Func>(i);
  return std::nullopt;
}

char binop_symbol(BinOp op) noexcept {
  switch (op) {
    case BinOp::Add:
      return '+';
    case BinOp::Sub:
      return '-';
    case BinOp::Mul:
      return '*';
    case BinOp::Div:
      return '/';
    case BinOp::Pow:
      return '^';
  }
  return '?';
}

bool is_variable_name(std::string_view name) noexcept {
  if (name == "u" || name == "t") return true;
  std::string_view idx;
  if (name.starts_with("xd"))
    idx = name.substr(2);
  else if (name.starts_with("x"))
    idx = name.substr(1);
  else
    return false;
  return digits_only(idx) && idx.front() != '0';
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node().index() != b.node().index()) return false;
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        const auto& m = std::get<T>(b.node());
        if constexpr (std::is_same_v<T, Number>) {
          return n.value == m.value || (std::isnan(n.value) && std::isnan(m.value));
        } else if constexpr (std::is_same_v<T, Variable>) {
          return n.name == m.name;
        } else if constexpr (std::is_same_v<T, Negate>) {
          return *n.operand == *m.operand;
        } else if constexpr (std::is_same_v<T, Call>) {
          return n.func == m.func && *n.arg == *m.arg;
        } else {
          return n.op == m.op && *n.lhs == *m.lhs && *n.rhs == *m.rhs;
        }
      },
      a.node());
}

Expr parse(std::string_view text) { return Parser(text).parse_all(); }

std::string print(const Expr& e) {
  std::string out;
  print_into(e, out);
  return out;
}

double eval(const Expr& e, const Environment& env) {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Number>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, Variable>) {
          const auto it = env.find(n.name);
          if (it == env.end()) throw EvalError("unbound variable '" + n.name + "'");
          return it->second;
        } else if constexpr (std::is_same_v<T, Negate>) {
          return -eval(*n.operand, env);
        } else if constexpr (std::is_same_v<T, Call>) {
          return apply(n.func, eval(*n.arg, env));
        } else {
          const double l = eval(*n.lhs, env);
          return apply(n.op, l, eval(*n.rhs, env));
        }
      },
      e.node());
}

std::set<std::string> free_vars(const Expr& e) {
  std::set<std::string> vars;
  collect(e, vars);
  return vars;
}

Program Program::compile(const Expr& e, const SlotResolver& resolve) {
  Program p;
  p.emit(e, resolve, 0);
  std::size_t depth = 0;
  for (const Instr& in : p.code_) {
    switch (in.op) {
      case Op::Push:
      case Op::Load:
        ++depth;
        break;
      case Op::Neg:
      case Op::Call:
        break;
      default:
        --depth;
    }
    p.max_stack_ = std::max(p.max_stack_, depth);
  }
  return p;
}

void Program::emit(const Expr& e, const SlotResolver& resolve, std::size_t depth) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Number>) {
          code_.push_back({Op::Push, 0, 0, n.value});
        } else if constexpr (std::is_same_v<T, Variable>) {
          const auto slot = resolve(n.name);
          if (!slot) throw EvalError("unbound variable '" + n.name + "'");
          code_.push_back({Op::Load, 0, *slot, 0.0});
        } else if constexpr (std::is_same_v<T, Negate>) {
          emit(*n.operand, resolve, depth + 1);
          code_.push_back({Op::Neg});
        } else if constexpr (std::is_same_v<T, Call>) {
          emit(*n.arg, resolve, depth + 1);
          code_.push_back({Op::Call, static_cast<unsigned char>(n.func)});
        } else {
          emit(*n.lhs, resolve, depth + 1);
          emit(*n.rhs, resolve, depth + 1);
          static constexpr Op ops[] = {Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Pow};
          code_.push_back({ops[static_cast<std::size_t>(n.op)]});
        }
      },
      e.node());
}

double Program::run(std::span<const double> slots) const {
  constexpr std::size_t kInline = 64;
  std::array<double, kInline> inline_stack;
  std::vector<double> heap_stack;
  double* stack = inline_stack.data();
  if (max_stack_ > kInline) {
    heap_stack.resize(max_stack_);
    stack = heap_stack.data();
  }
  std::size_t sp = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Push:
        stack[sp++] = in.value;
        break;
      case Op::Load:
        stack[sp++] = slots[in.slot];
        break;
      case Op::Neg:
        stack[sp - 1] = -stack[sp - 1];
        break;
      case Op::Call:
        stack[sp - 1] = apply(static_cast<Func>(in.func), stack[sp - 1]);
        break;
      default: {
        const double r = stack[--sp];
        const double l = stack[sp - 1];
        static constexpr BinOp ops[] = {BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div,
                                        BinOp::Pow};
        stack[sp - 1] = apply(ops[static_cast<std::size_t>(in.op) - static_cast<std::size_t>(Op::Add)], l, r);
      }
    }
  }
  return sp ? stack[0] : 0.0;
}

}  // namespace ratstab::expr
