#include "ttmba/expr.hpp"

#include <cctype>
#include <limits>

namespace ttmba {

ParseError::ParseError(std::size_t offset, const std::string& message)
    : std::runtime_error("syntax error at offset " + std::to_string(offset) + ": " + message),
      offset_(offset) {}

namespace {

enum class Tok { Ident, Number, Plus, Minus, Star, Amp, Pipe, Caret, Tilde, LParen, RParen, End };

struct Token {
  Tok kind;
  std::size_t offset;
  std::string_view text;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return cur_; }

  Token take() {
    Token t = cur_;
    advance();
    return t;
  }

private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    if (pos_ >= src_.size()) {
      cur_ = {Tok::End, start, {}};
      return;
    }
    const char c = src_[pos_];
    if (c >= 'a' && c <= 'z') {
      while (pos_ < src_.size() && ((src_[pos_] >= 'a' && src_[pos_] <= 'z') ||
                                    (src_[pos_] >= '0' && src_[pos_] <= '9')))
        ++pos_;
      cur_ = {Tok::Ident, start, src_.substr(start, pos_ - start)};
      return;
    }
    if (c >= '0' && c <= '9') {
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
      cur_ = {Tok::Number, start, src_.substr(start, pos_ - start)};
      return;
    }
    Tok kind;
    switch (c) {
      case '+': kind = Tok::Plus; break;
      case '-': kind = Tok::Minus; break;
      case '*': kind = Tok::Star; break;
      case '&': kind = Tok::Amp; break;
      case '|': kind = Tok::Pipe; break;
      case '^': kind = Tok::Caret; break;
      case '~': kind = Tok::Tilde; break;
      case '(': kind = Tok::LParen; break;
      case ')': kind = Tok::RParen; break;
      default:
        throw ParseError(start, std::string("unknown token '") + c + "'");
    }
    ++pos_;
    cur_ = {kind, start, src_.substr(start, 1)};
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token cur_{Tok::End, 0, {}};
};

int binary_precedence(Tok t) {
  switch (t) {
    case Tok::Pipe: return 1;
    case Tok::Caret: return 2;
    case Tok::Amp: return 3;
    case Tok::Plus:
    case Tok::Minus: return 4;
    case Tok::Star: return 5;
    default: return 0;
  }
}

Op binary_op(Tok t) {
  switch (t) {
    case Tok::Pipe: return Op::Or;
    case Tok::Caret: return Op::Xor;
    case Tok::Amp: return Op::And;
    case Tok::Plus: return Op::Add;
    case Tok::Minus: return Op::Sub;
    default: return Op::Mul;
  }
}

class Parser {
public:
  explicit Parser(std::string_view src) : lex_(src) {}

  Expr parse_all() {
    Expr e = parse_binary(1);
    const Token& t = lex_.peek();
    if (t.kind == Tok::RParen) throw ParseError(t.offset, "unbalanced ')'");
    if (t.kind != Tok::End)
      throw ParseError(t.offset, "unexpected '" + std::string(t.text) + "' (missing operator?)");
    return e;
  }

private:
  // Precedence climbing; all binary operators are left-associative.
  Expr parse_binary(int min_prec) {
    Expr lhs = parse_unary();
    for (;;) {
      const int prec = binary_precedence(lex_.peek().kind);
      if (prec == 0 || prec < min_prec) return lhs;
      const Op op = binary_op(lex_.take().kind);
      Expr rhs = parse_binary(prec + 1);
      lhs = Expr::binary(op, std::move(lhs), std::move(rhs));
    }
  }

  Expr parse_unary() {
    const Token& t = lex_.peek();
    if (t.kind == Tok::Tilde) {
      lex_.take();
      return Expr::unary(Op::Not, parse_unary());
    }
    if (t.kind == Tok::Minus) {
      lex_.take();
      return Expr::unary(Op::Neg, parse_unary());
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token t = lex_.take();
    switch (t.kind) {
      case Tok::Ident: return Expr::var(std::string(t.text));
      case Tok::Number: {
        Word v = 0;
        for (char c : t.text) {
          const Word d = static_cast<Word>(c - '0');
          if (v > (std::numeric_limits<Word>::max() - d) / 10)
            throw ParseError(t.offset, "constant out of range");
          v = v * 10 + d;
        }
        return Expr::constant(v);
      }
      case Tok::LParen: {
        open_.push_back(t.offset);
        Expr inner = parse_binary(1);
        open_.pop_back();
        const Token& close = lex_.peek();
        if (close.kind == Tok::End) throw ParseError(t.offset, "unbalanced '('");
        if (close.kind != Tok::RParen)
          throw ParseError(close.offset, "expected ')' but found '" + std::string(close.text) + "'");
        lex_.take();
        return inner;
      }
      case Tok::End:
        if (!open_.empty()) throw ParseError(open_.back(), "unbalanced '('");
        throw ParseError(t.offset, "expected operand at end of input");
      case Tok::RParen: throw ParseError(t.offset, "unbalanced ')'");
      default:
        throw ParseError(t.offset, "dangling operator before '" + std::string(t.text) + "'");
    }
  }

  Lexer lex_;
  std::vector<std::size_t> open_;  // offsets of unclosed '('
};

int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Or: return 1;
    case Op::Xor: return 2;
    case Op::And: return 3;
    case Op::Add:
    case Op::Sub: return 4;
    case Op::Mul: return 5;
    case Op::Neg:
    case Op::Not: return 6;
    default: return 7;
  }
}

void render_into(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Var: out += e.name(); return;
    case Op::Const: out += std::to_string(e.value()); return;
    case Op::Neg:
    case Op::Not: {
      out += op_symbol(e.op());
      const bool paren = precedence(e.child()) < 6;
      if (paren) out += '(';
      render_into(e.child(), out);
      if (paren) out += ')';
      return;
    }
    default: break;
  }
  const int p = precedence(e);
  const bool lparen = precedence(e.lhs()) < p;
  // Equal precedence on the right needs parentheses to keep left-associative structure.
  const bool rparen = precedence(e.rhs()) <= p;
  if (lparen) out += '(';
  render_into(e.lhs(), out);
  if (lparen) out += ')';
  out += op_symbol(e.op());
  if (rparen) out += '(';
  render_into(e.rhs(), out);
  if (rparen) out += ')';
}

}  // namespace

Expr parse(std::string_view text) {
  if (text.empty()) throw ParseError(0, "empty expression");
  return Parser(text).parse_all();
}

std::string render(const Expr& e) {
  std::string out;
  render_into(e, out);
  return out;
}

}  // namespace ttmba
