#include "ttmba/expr.hpp"

#include <algorithm>
#include <set>

namespace ttmba {

bool is_unary(Op op) { return op == Op::Neg || op == Op::Not; }

bool is_binary(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::And:
    case Op::Or:
    case Op::Xor:
      return true;
    default:
      return false;
  }
}

char op_symbol(Op op) {
  switch (op) {
    case Op::Neg: return '-';
    case Op::Not: return '~';
    case Op::Add: return '+';
    case Op::Sub: return '-';
    case Op::Mul: return '*';
    case Op::And: return '&';
    case Op::Or: return '|';
    case Op::Xor: return '^';
    default: return '?';
  }
}

Expr Expr::var(std::string name) {
  Expr e;
  e.node_ = std::make_shared<const Node>(Node{Op::Var, std::move(name), 0, {}, {}});
  return e;
}

Expr Expr::constant(Word value) {
  Expr e;
  e.node_ = std::make_shared<const Node>(Node{Op::Const, {}, value, {}, {}});
  return e;
}

Expr Expr::unary(Op op, Expr child) {
  if (!is_unary(op)) throw std::invalid_argument("Expr::unary: not a unary operator");
  Expr e;
  e.node_ = std::make_shared<const Node>(Node{op, {}, 0, std::move(child), {}});
  return e;
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
  if (!is_binary(op)) throw std::invalid_argument("Expr::binary: not a binary operator");
  Expr e;
  e.node_ = std::make_shared<const Node>(Node{op, {}, 0, std::move(lhs), std::move(rhs)});
  return e;
}

std::size_t Expr::size() const {
  if (!node_) return 0;
  return 1 + node_->lhs.size() + node_->rhs.size();
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (!a.node_ || !b.node_) return false;
  if (a.op() != b.op()) return false;
  switch (a.op()) {
    case Op::Var: return a.name() == b.name();
    case Op::Const: return a.value() == b.value();
    case Op::Neg:
    case Op::Not: return a.child() == b.child();
    default: return a.lhs() == b.lhs() && a.rhs() == b.rhs();
  }
}

UnboundVariable::UnboundVariable(const std::string& name)
    : std::runtime_error("unbound variable '" + name + "'"), name_(name) {}

namespace {

Word apply_binary(Op op, Word l, Word r) {
  switch (op) {
    case Op::Add: return l + r;
    case Op::Sub: return l - r;
    case Op::Mul: return l * r;
    case Op::And: return l & r;
    case Op::Or: return l | r;
    case Op::Xor: return l ^ r;
    default: return 0;
  }
}

Word eval_node(const Expr& e, const Assignment& a, Word mask) {
  switch (e.op()) {
    case Op::Var: {
      auto it = a.find(e.name());
      if (it == a.end()) throw UnboundVariable(e.name());
      return it->second & mask;
    }
    case Op::Const: return e.value() & mask;
    case Op::Neg: return (Word{0} - eval_node(e.child(), a, mask)) & mask;
    case Op::Not: return ~eval_node(e.child(), a, mask) & mask;
    default:
      return apply_binary(e.op(), eval_node(e.lhs(), a, mask), eval_node(e.rhs(), a, mask)) & mask;
  }
}

void check_width(unsigned width) {
  if (width < 1 || width > 64) throw std::invalid_argument("word width must be in [1, 64]");
}

std::vector<Word> eval_rows(const Expr& e, std::span<const std::string> vars,
                            std::span<const std::vector<Word>> columns, std::size_t rows,
                            Word mask) {
  std::vector<Word> out(rows);
  switch (e.op()) {
    case Op::Var: {
      auto it = std::find(vars.begin(), vars.end(), e.name());
      if (it == vars.end()) throw UnboundVariable(e.name());
      const auto& col = columns[static_cast<std::size_t>(it - vars.begin())];
      for (std::size_t i = 0; i < rows; ++i) out[i] = col[i] & mask;
      return out;
    }
    case Op::Const:
      std::fill(out.begin(), out.end(), e.value() & mask);
      return out;
    case Op::Neg: {
      out = eval_rows(e.child(), vars, columns, rows, mask);
      for (auto& v : out) v = (Word{0} - v) & mask;
      return out;
    }
    case Op::Not: {
      out = eval_rows(e.child(), vars, columns, rows, mask);
      for (auto& v : out) v = ~v & mask;
      return out;
    }
    default: break;
  }
  out = eval_rows(e.lhs(), vars, columns, rows, mask);
  const auto rhs = eval_rows(e.rhs(), vars, columns, rows, mask);
  const Op op = e.op();
  for (std::size_t i = 0; i < rows; ++i) out[i] = apply_binary(op, out[i], rhs[i]) & mask;
  return out;
}

void collect_vars(const Expr& e, std::set<std::string>& out) {
  switch (e.op()) {
    case Op::Var: out.insert(e.name()); return;
    case Op::Const: return;
    case Op::Neg:
    case Op::Not: collect_vars(e.child(), out); return;
    default:
      collect_vars(e.lhs(), out);
      collect_vars(e.rhs(), out);
  }
}

}  // namespace

Word evaluate(const Expr& e, const Assignment& a, unsigned width) {
  check_width(width);
  return eval_node(e, a, width_mask(width));
}

std::vector<Word> evaluate_rows(const Expr& e, std::span<const std::string> vars,
                                std::span<const std::vector<Word>> columns, unsigned width) {
  check_width(width);
  if (vars.size() != columns.size())
    throw std::invalid_argument("evaluate_rows: one column per variable required");
  const std::size_t rows = columns.empty() ? 1 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != rows) throw std::invalid_argument("evaluate_rows: ragged columns");
  return eval_rows(e, vars, columns, rows, width_mask(width));
}

std::vector<std::string> variables(const Expr& e) {
  std::set<std::string> names;
  collect_vars(e, names);
  return {names.begin(), names.end()};
}

}  // namespace ttmba
