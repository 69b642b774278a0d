#include <gtest/gtest.h>

#include <random>

#include "ttmba/truth_table.hpp"

using namespace ttmba;

namespace {

const std::vector<std::string> kAB{"a", "b"};

// Brute-force evaluation over 0/1 inputs written without the library's row logic.
std::vector<Word> brute_table(const std::string& text, const std::vector<std::string>& vars, unsigned w) {
  const Expr e = parse(text);
  std::vector<Word> out;
  const std::size_t n = vars.size();
  for (std::size_t row = 0; row < (std::size_t{1} << n); ++row) {
    Assignment a;
    for (std::size_t k = 0; k < n; ++k) a[vars[k]] = (row >> (n - 1 - k)) & 1;
    out.push_back(evaluate(e, a, w));
  }
  return out;
}

}  // namespace

TEST(Extract, XorAndSumExtended) {
  const auto t = extract(parse("(a^b)+2*(a&b)"), kAB, 8, TableKind::Extended);
  EXPECT_EQ(t.values, (std::vector<Word>{0, 1, 1, 2}));
  EXPECT_EQ(t.vars, kAB);
  EXPECT_EQ(t.rows(), 4u);
}

TEST(Extract, XorAndSumBoolean) {
  const auto t = extract(parse("(a^b)+2*(a&b)"), kAB, 8, TableKind::Boolean);
  EXPECT_EQ(t.values, (std::vector<Word>{0, 1, 1, 0}));
}

TEST(Extract, ConstantZero) {
  for (unsigned w : {1u, 8u, 64u})
    EXPECT_EQ(extract(parse("0"), kAB, w, TableKind::Extended).values, (std::vector<Word>(4, 0)));
}

TEST(Extract, RowOrderIsBigEndian) {
  const auto t = extract(parse("a"), {"a", "b", "c"}, 8, TableKind::Extended);
  EXPECT_EQ(t.values, (std::vector<Word>{0, 0, 0, 0, 1, 1, 1, 1}));
  EXPECT_EQ(t.bit(4, 0), 1u);
  EXPECT_EQ(t.bit(4, 2), 0u);
}

TEST(Extract, TooManyVariables) {
  EXPECT_THROW(extract(parse("a+b+c+d+e"), {"a", "b", "c", "d", "e"}, 8, TableKind::Extended), TooManyVariables);
  EXPECT_NO_THROW(extract(parse("a+b+c+d+e"), {"a", "b", "c", "d", "e"}, 8, TableKind::Extended, 5));
}

TEST(Extract, MissingVariableIsAnError) { EXPECT_THROW(extract(parse("a+q"), kAB, 8, TableKind::Extended), UnboundVariable); }

TEST(Extract, BooleanIsExtendedModTwo) {
  for (const char* s : {"x*y-3*(x|~y)", "-x", "~(x^y)+7", "x*x*y-z", "x&y|z"}) {
    const Expr e = parse(s);
    const auto vars = variables(e);
    const auto ext = extract(e, vars, 8, TableKind::Extended);
    const auto boo = extract(e, vars, 8, TableKind::Boolean);
    EXPECT_EQ(ext.values, brute_table(s, vars, 8));
    for (std::size_t i = 0; i < ext.rows(); ++i) EXPECT_EQ(boo.values[i], ext.values[i] & 1) << s;
  }
}

TEST(Equivalent, Examples) {
  EXPECT_TRUE(equivalent(parse("(x^y)+2*(x&y)"), parse("x+y")));
  EXPECT_FALSE(equivalent(parse("x"), parse("y")));
  EXPECT_TRUE(equivalent(parse("x&y"), parse("(x|y)-(x^y)")));
  EXPECT_EQ(brute_table("x&y", {"x", "y"}, 8), brute_table("(x|y)-(x^y)", {"x", "y"}, 8));
}

TEST(Equivalent, ReflexiveSymmetricAndRenamingInvariant) {
  const char* exprs[] = {"x+y", "(x^y)+2*(x&y)", "x|y", "x-y", "~x&y", "2*x"};
  for (const char* a : exprs) {
    EXPECT_TRUE(equivalent(parse(a), parse(a)));
    for (const char* b : exprs) {
      EXPECT_EQ(equivalent(parse(a), parse(b)), equivalent(parse(b), parse(a)));
      std::string ra = a, rb = b;
      for (auto* s : {&ra, &rb})
        for (char& ch : *s) ch = ch == 'x' ? 'p' : ch == 'y' ? 'q' : ch;
      EXPECT_EQ(equivalent(parse(a), parse(b)), equivalent(parse(ra), parse(rb)));
    }
  }
}

TEST(Equivalent, WitnessIsFirstDifferingRow) {
  const auto w = table_witness(parse("x"), parse("x+1"), 8);
  ASSERT_TRUE(w);
  EXPECT_EQ(w->at("x"), 0u);
  const auto w2 = table_witness(parse("x|y"), parse("x^y"), 8);
  ASSERT_TRUE(w2);
  EXPECT_EQ(w2->at("x"), 1u);
  EXPECT_EQ(w2->at("y"), 1u);
  EXPECT_FALSE(table_witness(parse("x+y"), parse("(x^y)+2*(x&y)"), 8));
}

TEST(RandomizedCheck, Examples) {
  EXPECT_TRUE(randomized_check(parse("x+y"), parse("(x^y)+2*(x&y)"), 8, 256, 1));
  for (std::size_t trials : {1u, 2u, 50u}) EXPECT_FALSE(randomized_check(parse("x"), parse("x+1"), 8, trials, 3));
  EXPECT_TRUE(randomized_check(parse("x*y-z"), parse("x*y-z"), 64, 256, 7));
}

TEST(RandomizedCheck, CatchesWhatTablesMiss) {
  // x*x and x agree on every 0/1 input.
  EXPECT_TRUE(equivalent(parse("x*x"), parse("x")));
  EXPECT_FALSE(randomized_check(parse("x*x"), parse("x"), 8, 256, 1));
}

TEST(RandomizedCheck, DeterministicInSeed) {
  const auto a = random_witness(parse("x*x"), parse("x"), 8, 256, 42);
  const auto b = random_witness(parse("x*x"), parse("x"), 8, 256, 42);
  ASSERT_TRUE(a && b);
  EXPECT_EQ(*a, *b);
}

TEST(Features, BooleanPadded) {
  TruthTable t{kAB, 8, TableKind::Boolean, {0, 1, 1, 0}};
  std::vector<double> expected(16, 0.0);
  expected[1] = expected[2] = 1.0 / 128;
  EXPECT_EQ(to_feature_vector({t}, Semantics::BoolTT, 4), expected);
}

TEST(Features, ExtendedSmallNmax) {
  TruthTable t{kAB, 8, TableKind::Extended, {0, 1, 1, 2}};
  EXPECT_EQ(to_feature_vector({t}, Semantics::ExtendedTT, 2), (std::vector<double>{0, 0.0078125, 0.0078125, 0.015625}));
}

TEST(Features, BothBooleanFirst) {
  const Expr e = parse("(a^b)+2*(a&b)");
  const auto f = expr_features(e, Semantics::Both, 8, 2);
  EXPECT_EQ(f, (std::vector<double>{0, 0.0078125, 0.0078125, 0, 0, 0.0078125, 0.0078125, 0.015625}));
  EXPECT_EQ(feature_length(Semantics::Both, 4), 32u);
  EXPECT_EQ(feature_length(Semantics::BoolTT, 4), 16u);
}

TEST(Features, SignedScalingStaysInRange) {
  const auto f = expr_features(parse("-x-128*y"), Semantics::ExtendedTT, 8, 4);
  EXPECT_DOUBLE_EQ(f[0], 0.0);
  EXPECT_DOUBLE_EQ(f[1], -1.0);           // x=0,y=1: -128
  EXPECT_DOUBLE_EQ(f[2], -1.0 / 128);     // x=1,y=0: -1
  EXPECT_DOUBLE_EQ(f[3], 127.0 / 128);    // x=1,y=1: -129 = 127
  for (double v : f) EXPECT_TRUE(v >= -1.0 && v <= 1.0);
}

TEST(Features, MismatchedTablesRejected) {
  TruthTable t{kAB, 8, TableKind::Extended, {0, 1, 1, 2}};
  EXPECT_THROW(to_feature_vector({t}, Semantics::BoolTT, 4), std::invalid_argument);
  EXPECT_THROW(to_feature_vector({t}, Semantics::Both, 4), std::invalid_argument);
  EXPECT_THROW(to_feature_vector({t}, Semantics::ExtendedTT, 1), std::exception);
}

namespace {

// Frozen from tests/oracles/expr_reference.py.
struct FrozenTable {
  std::string expr;
  std::vector<std::string> vars;
  unsigned width;
  std::vector<Word> values;
};

const std::vector<FrozenTable> kFrozenTables{
    {"(a^b)+2*(a&b)", {"a", "b"}, 8, {0, 1, 1, 2}},
    {"x&y", {"x", "y"}, 8, {0, 0, 0, 1}},
    {"(x|y)-(x^y)", {"x", "y"}, 8, {0, 0, 0, 1}},
    {"-5*(x&~y)+3*(t|z)", {"t", "x", "y", "z"}, 8, {0, 3, 0, 3, 251, 254, 0, 3, 3, 3, 3, 3, 254, 254, 3, 3}},
    {"4*(t|-y-1)-4*((y+z-(y|z)|y^z)+(y+z-(y|z)&(y^z)))", {"t", "y", "z"}, 8, {252, 248, 244, 244, 252, 248, 248, 248}},
    {"x*y*y-~x", {"x", "y"}, 16, {1, 1, 2, 3}},
};

struct FrozenPoint {
  std::string expr;
  Assignment env;
  unsigned width;
  Word value;
};

const std::vector<FrozenPoint> kFrozenPoints{
    {"~x", {{"x", 5u}}, 8, 250u},
    {"-x-1", {{"x", 5u}}, 8, 250u},
    {"(x^y)+2*(x&y)", {{"x", 155u}, {"y", 102u}}, 8, 1u},
    {"x*y-(x|~z)*3", {{"x", 209u}, {"y", 135u}, {"z", 125u}}, 8, 190u},
    {"-5*(x&~y)+3*(t|z)", {{"t", 65313u}, {"x", 46422u}, {"y", 54509u}, {"z", 28590u}}, 16, 22963u},
    {"x*x*x+y", {{"x", 9580329909864793253u}, {"y", 13423473056230787262u}}, 64, 3517631926276849691u},
};

}  // namespace

TEST(OracleValues, ExtendedTables) {
  for (const auto& f : kFrozenTables)
    EXPECT_EQ(extract(parse(f.expr), f.vars, f.width, TableKind::Extended).values, f.values) << f.expr;
}

TEST(OracleValues, FullWidthPoints) {
  for (const auto& f : kFrozenPoints) EXPECT_EQ(evaluate(parse(f.expr), f.env, f.width), f.value) << f.expr;
}

TEST(OracleValues, AndEqualsOrMinusXor) {
  EXPECT_TRUE(equivalent(parse("x&y"), parse("(x|y)-(x^y)")));
  EXPECT_EQ(kFrozenTables[1].values, kFrozenTables[2].values);
}
