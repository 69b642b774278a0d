#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ttmba/expr.hpp"
#include "ttmba/truth_table.hpp"

namespace ttmba {

// Template rewrite. In `pattern`, variables x/y/z bind arbitrary subtrees and
// `v` binds only a variable leaf. Variables that appear only in `replacement`
// are fresh: each application instantiates them with a pool variable distinct
// from every bound leaf.
struct RewriteRule {
  std::string name;
  Expr pattern;
  Expr replacement;
};

class RuleVerificationError : public std::runtime_error {
public:
  explicit RuleVerificationError(const std::string& rule);
};

// Built-in obfuscation rules, each checked with the table oracle and a
// 256-trial randomized check on first use.
const std::vector<RewriteRule>& rule_table();

// Throws RuleVerificationError naming the first rule that is not an identity.
void verify_rules(const std::vector<RewriteRule>& rules, unsigned width = kDefaultWidth);

// Preorder indices of the nodes of `e` that `rule` matches.
std::vector<std::size_t> match_positions(const Expr& e, const RewriteRule& rule);

// Rewrites the node at preorder index `position`. Fresh variables are taken, in
// order, from `fresh` (names already bound by the match are skipped).
Expr apply_rule(const Expr& e, const RewriteRule& rule, std::size_t position,
                const std::vector<std::string>& fresh);

inline const std::vector<std::string>& default_var_pool() {
  static const std::vector<std::string> pool{"x", "y", "z", "t"};
  return pool;
}

// `steps` random rewrites: a rule chosen uniformly among those that match
// somewhere, applied at a uniformly chosen matching node.
Expr obfuscate(const Expr& e, std::size_t steps, std::uint64_t seed,
               const std::vector<std::string>& var_pool = default_var_pool(),
               const std::vector<RewriteRule>& rules = rule_table());

struct DatasetPair {
  std::string src;
  std::string trg;
  friend bool operator==(const DatasetPair&, const DatasetPair&) = default;
};

struct GenConfig {
  std::size_t min_steps = 2;
  std::size_t max_steps = 4;
  std::vector<std::string> var_pool = default_var_pool();
  // Target terms carry coefficients in [-max_coeff, max_coeff] \ {0}.
  int max_coeff = 5;
  std::size_t max_terms = 2;
  unsigned width = kDefaultWidth;
  std::size_t max_src_len = 104;
};

// Short simplified target: a sum of coefficient-scaled bitwise terms.
Expr random_target(const GenConfig& config, std::uint64_t seed);

std::vector<DatasetPair> generate(std::size_t n, const GenConfig& config, std::uint64_t seed);

class MalformedLine : public std::runtime_error {
public:
  MalformedLine(std::size_t line, const std::string& why);
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

// One `src,trg` pair per line; '#' comments and blank lines are skipped.
std::vector<DatasetPair> parse_pairs(const std::string& text, bool has_header = false);
std::vector<DatasetPair> load_pairs(const std::filesystem::path& path, bool has_header = false);
std::string format_pairs(const std::vector<DatasetPair>& pairs);
void save_pairs(const std::vector<DatasetPair>& pairs, const std::filesystem::path& path);

struct Spread {
  double mid = 0;   // (min + max) / 2
  double half = 0;  // (max - min) / 2
};

struct SideStats {
  Spread vars;  // variable occurrences
  Spread ops;   // operator tokens
  Spread length;
};

struct DatasetStats {
  std::size_t count = 0;
  SideStats src;
  SideStats trg;
};

DatasetStats stats(const std::vector<DatasetPair>& pairs);
std::string format_stats_table(const DatasetStats& s);
std::string format_stats_kv(const DatasetStats& s);

}  // namespace ttmba
