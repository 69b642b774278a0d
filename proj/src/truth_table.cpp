#include "ttmba/truth_table.hpp"

#include <algorithm>
#include <random>

namespace ttmba {

TooManyVariables::TooManyVariables(std::size_t count, std::size_t limit)
    : std::runtime_error("expression has " + std::to_string(count) +
                         " variables; at most " + std::to_string(limit) + " supported") {}

namespace {

std::vector<std::string> union_vars(const Expr& a, const Expr& b) {
  auto va = variables(a);
  auto vb = variables(b);
  std::vector<std::string> out;
  std::set_union(va.begin(), va.end(), vb.begin(), vb.end(), std::back_inserter(out));
  return out;
}

std::vector<std::vector<Word>> boolean_columns(std::size_t n) {
  const std::size_t rows = std::size_t{1} << n;
  std::vector<std::vector<Word>> cols(n, std::vector<Word>(rows));
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t r = 0; r < rows; ++r) cols[v][r] = (r >> (n - 1 - v)) & 1U;
  return cols;
}

Assignment row_assignment(const std::vector<std::string>& vars, std::size_t row) {
  Assignment a;
  const std::size_t n = vars.size();
  for (std::size_t v = 0; v < n; ++v) a[vars[v]] = (row >> (n - 1 - v)) & 1U;
  return a;
}

}  // namespace

TruthTable extract(const Expr& e, const std::vector<std::string>& vars, unsigned width,
                   TableKind kind, std::size_t max_vars) {
  if (vars.size() > max_vars) throw TooManyVariables(vars.size(), max_vars);
  const auto cols = boolean_columns(vars.size());
  TruthTable t;
  t.vars = vars;
  t.width = width;
  t.kind = kind;
  t.values = evaluate_rows(e, vars, cols, width);
  if (kind == TableKind::Boolean)
    for (auto& v : t.values) v &= 1U;
  return t;
}

std::optional<Assignment> table_witness(const Expr& a, const Expr& b, unsigned width,
                                        std::size_t max_vars) {
  const auto vars = union_vars(a, b);
  const auto ta = extract(a, vars, width, TableKind::Extended, max_vars);
  const auto tb = extract(b, vars, width, TableKind::Extended, max_vars);
  for (std::size_t r = 0; r < ta.rows(); ++r)
    if (ta.values[r] != tb.values[r]) return row_assignment(vars, r);
  return std::nullopt;
}

bool equivalent(const Expr& a, const Expr& b, unsigned width, std::size_t max_vars) {
  return !table_witness(a, b, width, max_vars).has_value();
}

std::optional<Assignment> random_witness(const Expr& a, const Expr& b, unsigned width,
                                         std::size_t trials, std::uint64_t seed) {
  const auto vars = union_vars(a, b);
  std::mt19937_64 rng(seed);
  const Word mask = width_mask(width);
  std::vector<std::vector<Word>> cols(vars.size(), std::vector<Word>(trials));
  for (std::size_t t = 0; t < trials; ++t)
    for (auto& c : cols) c[t] = rng() & mask;
  const auto va = evaluate_rows(a, vars, cols, width);
  const auto vb = evaluate_rows(b, vars, cols, width);
  for (std::size_t t = 0; t < trials; ++t) {
    if (va[t] == vb[t]) continue;
    Assignment w;
    for (std::size_t v = 0; v < vars.size(); ++v) w[vars[v]] = cols[v][t];
    return w;
  }
  return std::nullopt;
}

bool randomized_check(const Expr& a, const Expr& b, unsigned width, std::size_t trials,
                      std::uint64_t seed) {
  return !random_witness(a, b, width, trials, seed).has_value();
}

std::size_t feature_length(Semantics s, std::size_t max_vars) {
  const std::size_t block = std::size_t{1} << max_vars;
  return s == Semantics::Both ? 2 * block : block;
}

std::vector<double> to_feature_vector(const std::vector<TruthTable>& tables, Semantics s,
                                      std::size_t max_vars) {
  const std::size_t expected = s == Semantics::Both ? 2 : 1;
  if (tables.size() != expected)
    throw std::invalid_argument("to_feature_vector: expected " + std::to_string(expected) +
                                " table(s), got " + std::to_string(tables.size()));
  auto required_kind = [&](std::size_t i) {
    if (s == Semantics::BoolTT) return TableKind::Boolean;
    if (s == Semantics::ExtendedTT) return TableKind::Extended;
    return i == 0 ? TableKind::Boolean : TableKind::Extended;
  };
  const std::size_t block = std::size_t{1} << max_vars;
  std::vector<double> out(expected * block, 0.0);
  for (std::size_t i = 0; i < expected; ++i) {
    const TruthTable& t = tables[i];
    if (t.kind != required_kind(i))
      throw std::invalid_argument("to_feature_vector: table kind does not match semantics");
    if (t.vars.size() > max_vars) throw TooManyVariables(t.vars.size(), max_vars);
    if (t.values.size() != (std::size_t{1} << t.vars.size()))
      throw std::invalid_argument("to_feature_vector: table length is not 2^n");
    const double scale = 1.0 / static_cast<double>(Word{1} << (t.width - 1));
    const Word sign = Word{1} << (t.width - 1);
    for (std::size_t r = 0; r < t.values.size(); ++r) {
      const Word v = t.values[r] & width_mask(t.width);
      const double signed_v = (v & sign) ? -static_cast<double>((width_mask(t.width) - v) + 1)
                                         : static_cast<double>(v);
      out[i * block + r] = signed_v * scale;
    }
  }
  return out;
}

std::vector<double> expr_features(const Expr& e, Semantics s, unsigned width,
                                  std::size_t max_vars) {
  const auto vars = variables(e);
  std::vector<TruthTable> tables;
  if (s != Semantics::ExtendedTT) tables.push_back(extract(e, vars, width, TableKind::Boolean, max_vars));
  if (s != Semantics::BoolTT) tables.push_back(extract(e, vars, width, TableKind::Extended, max_vars));
  return to_feature_vector(tables, s, max_vars);
}

}  // namespace ttmba
