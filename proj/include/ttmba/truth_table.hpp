#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ttmba/expr.hpp"

namespace ttmba {

inline constexpr unsigned kDefaultWidth = 8;
inline constexpr std::size_t kDefaultMaxVars = 4;

enum class TableKind : std::uint8_t { Boolean, Extended };

// Row i holds f at the 0/1 assignment whose bits, read big-endian over `vars`,
// spell i; row 0 is (0,...,0) and the last row is (1,...,1).
struct TruthTable {
  std::vector<std::string> vars;
  unsigned width = kDefaultWidth;
  TableKind kind = TableKind::Extended;
  std::vector<Word> values;

  std::size_t rows() const { return values.size(); }
  // 0/1 value of variable `var_index` in row `row`.
  unsigned bit(std::size_t row, std::size_t var_index) const {
    return static_cast<unsigned>((row >> (vars.size() - 1 - var_index)) & 1U);
  }
  friend bool operator==(const TruthTable&, const TruthTable&) = default;
};

class TooManyVariables : public std::runtime_error {
public:
  TooManyVariables(std::size_t count, std::size_t limit);
};

TruthTable extract(const Expr& e, const std::vector<std::string>& vars, unsigned width,
                   TableKind kind, std::size_t max_vars = kDefaultMaxVars);

// Extended-table equality over the union of both expressions' variables.
bool equivalent(const Expr& a, const Expr& b, unsigned width = kDefaultWidth,
                std::size_t max_vars = kDefaultMaxVars);

// First row where the extended tables differ, as an assignment; nullopt when equal.
std::optional<Assignment> table_witness(const Expr& a, const Expr& b, unsigned width,
                                        std::size_t max_vars = kDefaultMaxVars);

// Agreement on `trials` full-range assignments drawn from `seed`. Returns the
// first disagreeing assignment, or nullopt.
std::optional<Assignment> random_witness(const Expr& a, const Expr& b, unsigned width,
                                         std::size_t trials, std::uint64_t seed);

bool randomized_check(const Expr& a, const Expr& b, unsigned width, std::size_t trials,
                      std::uint64_t seed);

enum class Semantics : std::uint8_t { BoolTT, ExtendedTT, Both };

std::size_t feature_length(Semantics s, std::size_t max_vars);

// Values are read as signed `width`-bit words and scaled by 2^-(width-1); each
// table fills the front of a 2^max_vars block, zero-padded. For Both the
// Boolean block comes first.
std::vector<double> to_feature_vector(const std::vector<TruthTable>& tables, Semantics s,
                                      std::size_t max_vars = kDefaultMaxVars);

// Tables of the requested kind(s) over variables(e), then the feature vector.
std::vector<double> expr_features(const Expr& e, Semantics s, unsigned width = kDefaultWidth,
                                  std::size_t max_vars = kDefaultMaxVars);

}  // namespace ttmba
