#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ttmba {

using Word = std::uint64_t;

enum class Op : std::uint8_t { Var, Const, Neg, Not, Add, Sub, Mul, And, Or, Xor };

bool is_unary(Op op);
bool is_binary(Op op);
// Single-character spelling of an operator ('-' for both Sub and Neg).
char op_symbol(Op op);

// Immutable MBA expression tree. Copies share structure.
class Expr {
public:
  Expr() = default;

  static Expr var(std::string name);
  static Expr constant(Word value);
  static Expr unary(Op op, Expr child);
  static Expr binary(Op op, Expr lhs, Expr rhs);

  bool valid() const { return static_cast<bool>(node_); }
  Op op() const;
  const std::string& name() const;
  Word value() const;
  const Expr& child() const;
  const Expr& lhs() const;
  const Expr& rhs() const;

  // Number of nodes in the tree.
  std::size_t size() const;

  friend bool operator==(const Expr& a, const Expr& b);

private:
  struct Node;
  std::shared_ptr<const Node> node_;
};

struct Expr::Node {
  Op op;
  std::string name;
  Word value = 0;
  Expr lhs;
  Expr rhs;
};

inline Op Expr::op() const { return node_->op; }
inline const std::string& Expr::name() const { return node_->name; }
inline Word Expr::value() const { return node_->value; }
inline const Expr& Expr::child() const { return node_->lhs; }
inline const Expr& Expr::lhs() const { return node_->lhs; }
inline const Expr& Expr::rhs() const { return node_->rhs; }

class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t offset, const std::string& message);
  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

class UnboundVariable : public std::runtime_error {
public:
  explicit UnboundVariable(const std::string& name);
  const std::string& variable() const { return name_; }

private:
  std::string name_;
};

// Precedence, loosest to tightest: | ^ & (+ -) * unary.
Expr parse(std::string_view text);

// Minimal-parentheses canonical spelling without whitespace.
std::string render(const Expr& e);

using Assignment = std::map<std::string, Word, std::less<>>;

inline Word width_mask(unsigned width) {
  return width >= 64 ? ~Word{0} : ((Word{1} << width) - 1);
}

// Arithmetic is performed modulo 2^width, 1 <= width <= 64.
Word evaluate(const Expr& e, const Assignment& a, unsigned width);

// Evaluates `e` over many assignments at once. `columns[i]` holds the values of
// `vars[i]` for every row; all columns must have the same length.
std::vector<Word> evaluate_rows(const Expr& e, std::span<const std::string> vars,
                                std::span<const std::vector<Word>> columns, unsigned width);

// Sorted ascending, deduplicated.
std::vector<std::string> variables(const Expr& e);

}  // namespace ttmba
