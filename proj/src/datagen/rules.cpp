#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "ttmba/datagen.hpp"

namespace ttmba {

RuleVerificationError::RuleVerificationError(const std::string& rule)
    : std::runtime_error("rewrite rule '" + rule + "' is not an identity") {}

namespace {

using Bindings = std::map<std::string, Expr, std::less<>>;

bool is_leaf_metavar(const std::string& name) { return name == "v"; }

bool match(const Expr& pattern, const Expr& node, Bindings& b) {
  if (pattern.op() == Op::Var) {
    if (is_leaf_metavar(pattern.name()) && node.op() != Op::Var) return false;
    auto [it, inserted] = b.try_emplace(pattern.name(), node);
    return inserted || it->second == node;
  }
  if (pattern.op() != node.op()) return false;
  switch (pattern.op()) {
    case Op::Const: return pattern.value() == node.value();
    case Op::Neg:
    case Op::Not: return match(pattern.child(), node.child(), b);
    default: return match(pattern.lhs(), node.lhs(), b) && match(pattern.rhs(), node.rhs(), b);
  }
}

Expr instantiate(const Expr& tmpl, const Bindings& b) {
  switch (tmpl.op()) {
    case Op::Var: {
      auto it = b.find(tmpl.name());
      return it == b.end() ? tmpl : it->second;
    }
    case Op::Const: return tmpl;
    case Op::Neg:
    case Op::Not: return Expr::unary(tmpl.op(), instantiate(tmpl.child(), b));
    default:
      return Expr::binary(tmpl.op(), instantiate(tmpl.lhs(), b), instantiate(tmpl.rhs(), b));
  }
}

void preorder(const Expr& e, std::vector<Expr>& out) {
  out.push_back(e);
  if (is_unary(e.op())) {
    preorder(e.child(), out);
  } else if (is_binary(e.op())) {
    preorder(e.lhs(), out);
    preorder(e.rhs(), out);
  }
}

Expr replace_at(const Expr& e, std::size_t& counter, std::size_t target, const Expr& with) {
  if (counter == target) {
    // Skip the counter past this subtree; nothing below is visited.
    counter += e.size();
    return with;
  }
  ++counter;
  if (is_unary(e.op())) {
    if (counter + e.child().size() <= target) {
      counter += e.child().size();
      return e;
    }
    return Expr::unary(e.op(), replace_at(e.child(), counter, target, with));
  }
  if (is_binary(e.op())) {
    if (target >= counter + e.lhs().size()) {
      counter += e.lhs().size();
      return Expr::binary(e.op(), e.lhs(), replace_at(e.rhs(), counter, target, with));
    }
    Expr lhs = replace_at(e.lhs(), counter, target, with);
    return Expr::binary(e.op(), std::move(lhs), e.rhs());
  }
  return e;
}

RewriteRule make_rule(std::string name, std::string_view lhs, std::string_view rhs) {
  return RewriteRule{std::move(name), parse(lhs), parse(rhs)};
}

std::vector<RewriteRule> builtin_rules() {
  return {
      make_rule("sum-to-xor-and", "x+y", "(x^y)+2*(x&y)"),
      make_rule("sum-to-or-and", "x+y", "(x|y)+(x&y)"),
      make_rule("xor-to-or-and", "x^y", "(x|y)-(x&y)"),
      make_rule("and-to-or-xor", "x&y", "(x|y)-(x^y)"),
      make_rule("or-to-and-xor", "x|y", "(x&y)+(x^y)"),
      make_rule("sub-to-xor-and", "x-y", "(x^y)-2*(~x&y)"),
      make_rule("not-to-neg", "~x", "-x-1"),
      make_rule("split-var", "v", "(v&u)+(v&~u)"),
      make_rule("neg-to-not", "-x", "~x+1"),
      make_rule("or-to-sum", "x|y", "x+y-(x&y)"),
      make_rule("xor-to-sum", "x^y", "x+y-2*(x&y)"),
      make_rule("and-to-sum", "x&y", "x+y-(x|y)"),
  };
}

}  // namespace

void verify_rules(const std::vector<RewriteRule>& rules, unsigned width) {
  for (const auto& r : rules) {
    // Bind each metavariable to a distinct concrete variable; fresh names stay as they are.
    Bindings b;
    const auto names = variables(r.pattern);
    for (const auto& n : names) b.emplace(n, Expr::var("m" + n));
    const Expr lhs = instantiate(r.pattern, b);
    const Expr rhs = instantiate(r.replacement, b);
    if (!equivalent(lhs, rhs, width) || !randomized_check(lhs, rhs, width, 256, 0x5eed))
      throw RuleVerificationError(r.name);
  }
}

const std::vector<RewriteRule>& rule_table() {
  static const std::vector<RewriteRule> rules = [] {
    auto r = builtin_rules();
    verify_rules(r);
    verify_rules(r, 64);
    return r;
  }();
  return rules;
}

std::vector<std::size_t> match_positions(const Expr& e, const RewriteRule& rule) {
  std::vector<Expr> nodes;
  preorder(e, nodes);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Bindings b;
    if (match(rule.pattern, nodes[i], b)) out.push_back(i);
  }
  return out;
}

Expr apply_rule(const Expr& e, const RewriteRule& rule, std::size_t position,
                const std::vector<std::string>& fresh) {
  std::vector<Expr> nodes;
  preorder(e, nodes);
  if (position >= nodes.size()) throw std::out_of_range("apply_rule: position out of range");
  Bindings b;
  if (!match(rule.pattern, nodes[position], b))
    throw std::invalid_argument("apply_rule: rule '" + rule.name + "' does not match");

  std::set<std::string> taken;
  for (const auto& [_, bound] : b)
    if (bound.op() == Op::Var) taken.insert(bound.name());
  const auto pattern_vars = variables(rule.pattern);
  auto next = fresh.begin();
  for (const auto& name : variables(rule.replacement)) {
    if (std::binary_search(pattern_vars.begin(), pattern_vars.end(), name)) continue;
    while (next != fresh.end() && taken.count(*next)) ++next;
    if (next == fresh.end())
      throw std::invalid_argument("apply_rule: no fresh variable available for '" + rule.name + "'");
    taken.insert(*next);
    b.emplace(name, Expr::var(*next++));
  }
  std::size_t counter = 0;
  return replace_at(e, counter, position, instantiate(rule.replacement, b));
}

Expr obfuscate(const Expr& e, std::size_t steps, std::uint64_t seed,
               const std::vector<std::string>& var_pool, const std::vector<RewriteRule>& rules) {
  std::mt19937_64 rng(seed);
  Expr cur = e;
  for (std::size_t s = 0; s < steps; ++s) {
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> eligible;
    for (std::size_t r = 0; r < rules.size(); ++r) {
      auto pos = match_positions(cur, rules[r]);
      if (!pos.empty()) eligible.emplace_back(r, std::move(pos));
    }
    if (eligible.empty()) continue;
    const auto& [rule_index, positions] = eligible[rng() % eligible.size()];
    const std::size_t position = positions[rng() % positions.size()];
    std::vector<std::string> fresh = var_pool;
    for (std::size_t i = fresh.size(); i > 1; --i) std::swap(fresh[i - 1], fresh[rng() % i]);
    cur = apply_rule(cur, rules[rule_index], position, fresh);
  }
  return cur;
}

}  // namespace ttmba
