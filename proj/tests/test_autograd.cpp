#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ttmba/checkpoint.hpp"
#include "ttmba/tensor.hpp"

using namespace ttmba::ag;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Tensor param(ParamStore& ps, const std::string& name, Shape shape, std::uint64_t seed, double scale = 1.0) {
  const std::size_t n = numel(shape);
  return ps.add(name, Tensor::from(std::move(shape), random_values(n, seed, scale), true));
}

// Random fixed weights turn any tensor into a scalar with a generic gradient.
Tensor probe(const Tensor& t, std::uint64_t seed) {
  return sum(mul(t, Tensor::from(t.shape(), random_values(t.numel(), seed))));
}

}  // namespace

TEST(Shapes, MatmulShape) {
  const Tensor c = matmul(Tensor::zeros({2, 3}), Tensor::zeros({3, 4}));
  EXPECT_EQ(c.shape(), (Shape{2, 4}));
  EXPECT_EQ(matmul(Tensor::zeros({5, 2, 3}), Tensor::zeros({3, 4})).shape(), (Shape{5, 2, 4}));
  EXPECT_EQ(matmul(Tensor::zeros({5, 2, 3}), Tensor::zeros({5, 3, 4})).shape(), (Shape{5, 2, 4}));
}

TEST(Shapes, MismatchNamesOperationAndShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 4}));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4,4]"), std::string::npos) << msg;
  }
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), ShapeError);
  EXPECT_THROW(concat({Tensor::zeros({2, 3}), Tensor::zeros({3, 2})}, 0), ShapeError);
  EXPECT_THROW(reshape(Tensor::zeros({2, 3}), {4}), ShapeError);
}

TEST(Forward, SoftmaxRowsSumToOne) {
  const Tensor s = softmax(Tensor::from({4, 7}, random_values(28, 1, 30.0)));
  for (std::size_t r = 0; r < 4; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < 7; ++j) total += s.values()[r * 7 + j];
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Forward, LayerNormStandardizes) {
  const Tensor x = Tensor::from({3, 10}, random_values(30, 2, 5.0));
  const Tensor y = layer_norm(x, Tensor::from({10}, std::vector<double>(10, 1.0)), Tensor::zeros({10}), 1e-12);
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 10; ++j) mean += y.values()[r * 10 + j] / 10;
    for (std::size_t j = 0; j < 10; ++j) var += std::pow(y.values()[r * 10 + j] - mean, 2) / 10;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(Forward, MaskedFillBroadcasts) {
  const Tensor x = Tensor::zeros({2, 2, 3});
  const Tensor y = masked_fill(x, Mask{{2, 1, 3}, {1, 0, 0, 0, 0, 1}}, -5.0);
  EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()),
            (std::vector<double>{-5, 0, 0, -5, 0, 0, 0, 0, -5, 0, 0, -5}));
}

TEST(Forward, EmbeddingGathersRows) {
  const Tensor table = Tensor::from({3, 2}, {0, 1, 10, 11, 20, 21});
  const std::vector<int> ids{2, 0, 2};
  const Tensor e = embedding(table, ids, {3});
  EXPECT_EQ(e.shape(), (Shape{3, 2}));
  EXPECT_EQ(std::vector<double>(e.values().begin(), e.values().end()), (std::vector<double>{20, 21, 0, 1, 20, 21}));
  const std::vector<int> bad{3};
  EXPECT_THROW(embedding(table, bad, {1}), std::out_of_range);
}

TEST(CrossEntropy, ClosedForms) {
  const std::vector<int> t{0, 3};
  EXPECT_NEAR(cross_entropy(Tensor::zeros({2, 4}), t).item(), std::log(4.0), 1e-12);
  std::vector<double> sharp(8, -1e3);
  sharp[0] = sharp[7] = 1e3;
  EXPECT_NEAR(cross_entropy(Tensor::from({2, 4}, sharp), t).item(), 0.0, 1e-12);
  const std::vector<int> ignored{-1, -1};
  EXPECT_EQ(cross_entropy(Tensor::zeros({2, 4}), ignored, -1).item(), 0.0);
  const std::vector<int> bad{0, 4};
  EXPECT_THROW(cross_entropy(Tensor::zeros({2, 4}), bad), std::out_of_range);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  const auto vals = random_values(12, 3);
  Tensor logits = Tensor::from({3, 4}, vals, true);
  const std::vector<int> t{1, -1, 2};
  backward(cross_entropy(logits, t, -1));
  const Tensor p = softmax(Tensor::from({3, 4}, vals));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 4; ++j) {
      double expect = 0.0;
      if (t[r] >= 0) expect = (p.values()[r * 4 + j] - (static_cast<int>(j) == t[r] ? 1.0 : 0.0)) / 2.0;
      EXPECT_NEAR(logits.grad()[r * 4 + j], expect, 1e-14);
    }
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::from({2, 3}, random_values(6, 4), true);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, UnreachedTensorKeepsZeroGradient) {
  Tensor x = Tensor::from({3}, random_values(3, 5), true);
  Tensor y = Tensor::from({3}, random_values(3, 6), true);
  backward(sum(scale(y, 2.0)));
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, AccumulatesAlongAllPaths) {
  Tensor x = Tensor::from({2}, {1.5, -2.0}, true);
  backward(sum(add(mul(x, x), x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -3.0);
}

TEST(Backward, RequiresScalar) { EXPECT_THROW(backward(Tensor::from({2}, {1, 2}, true)), std::invalid_argument); }

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  NoGradGuard guard;
  EXPECT_FALSE(grad_enabled());
  EXPECT_FALSE(sum(mul(x, x)).requires_grad());
}

TEST(GradCheck, QuadraticIsNearlyExact) {
  ParamStore ps;
  Tensor x = param(ps, "x", {10}, 7);
  EXPECT_LT(grad_check([&] { return sum(mul(x, x)); }, ps), 1e-7);
}

TEST(GradCheck, Primitives) {
  ParamStore ps;
  Tensor a = param(ps, "a", {2, 3, 4}, 10);
  Tensor b = param(ps, "b", {4, 5}, 11);
  Tensor bb = param(ps, "bb", {2, 4, 5}, 12);
  Tensor bias = param(ps, "bias", {4}, 13);
  Tensor row = param(ps, "row", {3, 1}, 14);
  Tensor gamma = param(ps, "gamma", {4}, 15);
  Tensor beta = param(ps, "beta", {4}, 16);
  Tensor table = param(ps, "table", {6, 4}, 17);
  const std::vector<int> ids{5, 0, 5, 2};
  const std::vector<int> targets{1, 3, -1, 0, 2, 1};
  const Mask mask{{2, 1, 4}, {0, 1, 0, 0, 1, 0, 0, 1}};
  std::mt19937_64 drop_rng(1);

  const std::vector<std::pair<std::string, std::function<Tensor()>>> cases{
      {"matmul-shared", [&] { return probe(matmul(a, b), 1); }},
      {"matmul-batched", [&] { return probe(matmul(a, bb), 2); }},
      {"transpose", [&] { return probe(transpose(a), 3); }},
      {"permute", [&] { return probe(permute(a, {2, 0, 1}), 4); }},
      {"reshape", [&] { return probe(reshape(a, {6, 4}), 5); }},
      {"add-same", [&] { return probe(add(a, a), 6); }},
      {"add-bias", [&] { return probe(add(a, bias), 7); }},
      {"add-broadcast", [&] { return probe(add(a, row), 8); }},
      {"mul", [&] { return probe(mul(a, add(a, bias)), 9); }},
      {"mul-broadcast", [&] { return probe(mul(a, row), 10); }},
      {"scale", [&] { return probe(scale(a, -0.7), 11); }},
      {"concat", [&] { return probe(concat({a, add(a, bias)}, 1), 12); }},
      {"concat-last", [&] { return probe(concat({a, slice(a, 2, 0, 1)}, 2), 13); }},
      {"slice", [&] { return probe(slice(a, 2, 1, 3), 14); }},
      {"embedding", [&] { return probe(embedding(table, ids, {2, 2}), 15); }},
      {"softmax", [&] { return probe(softmax(a), 16); }},
      {"log_softmax", [&] { return probe(log_softmax(a), 17); }},
      {"layer_norm", [&] { return probe(layer_norm(a, gamma, beta), 18); }},
      {"relu", [&] { return probe(relu(a), 19); }},
      {"masked_fill", [&] { return probe(softmax(masked_fill(a, mask, -1e30)), 20); }},
      {"cross_entropy", [&] { return cross_entropy(reshape(a, {6, 4}), targets, -1); }},
      {"dropout", [&] {
         drop_rng.seed(5);
         return probe(dropout(a, 0.3, drop_rng), 21);
       }},
      {"sum", [&] { return sum(mul(a, a)); }},
  };
  for (const auto& [name, f] : cases) EXPECT_LT(grad_check(f, ps), 1e-4) << name;
}

TEST(GradCheck, TwoLayerMlp) {
  ParamStore ps;
  Tensor w1 = param(ps, "w1", {5, 8}, 20, 0.5);
  Tensor b1 = param(ps, "b1", {8}, 21, 0.1);
  Tensor w2 = param(ps, "w2", {8, 3}, 22, 0.5);
  Tensor b2 = param(ps, "b2", {3}, 23, 0.1);
  const Tensor x = Tensor::from({6, 5}, random_values(30, 24));
  const std::vector<int> t{0, 1, 2, 2, 1, 0};
  auto f = [&] { return cross_entropy(add(matmul(relu(add(matmul(x, w1), b1)), w2), b2), t); };
  EXPECT_LT(grad_check(f, ps), 1e-4);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParamStore ps;
  Tensor x = param(ps, "x", {4}, 30);
  const std::vector<double> before(x.values().begin(), x.values().end());
  AdamState st;
  ps.zero_grad();
  for (int i = 0; i < 5; ++i) adam_step(ps, st, {});
  EXPECT_EQ(std::vector<double>(x.values().begin(), x.values().end()), before);
}

TEST(Adam, ConstantGradientStepsByLr) {
  ParamStore ps;
  Tensor x = ps.add("x", Tensor::from({1}, {0.0}, true));
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.01;
  double last = 0.0;
  for (int i = 0; i < 200; ++i) {
    ps.zero_grad();
    x.grad()[0] = 3.0;
    last = x.values()[0];
    adam_step(ps, st, cfg);
  }
  EXPECT_NEAR(last - x.values()[0], 0.01, 1e-6);
}

TEST(Adam, ConvergesOnQuadratic) {
  ParamStore ps;
  Tensor x = ps.add("x", Tensor::from({3}, {4.0, -2.0, 1.0}, true));
  const Tensor target = Tensor::from({3}, {1.0, 2.0, -3.0});
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (int i = 0; i < 2000; ++i) {
    ps.zero_grad();
    const Tensor d = add(x, scale(target, -1.0));
    backward(sum(mul(d, d)));
    adam_step(ps, st, cfg);
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(x.values()[i], target.values()[i], 1e-3);
}

TEST(ClipGradNorm, RescalesToMaxNorm) {
  ParamStore ps;
  Tensor x = ps.add("x", Tensor::from({2}, {0.0, 0.0}, true));
  x.grad()[0] = 3.0;
  x.grad()[1] = 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(x.grad()[0], 0.6, 1e-12);
  EXPECT_NEAR(x.grad()[1], 0.8, 1e-12);
}

TEST(ParamStoreTest, UniqueNamesAndOrder) {
  ParamStore ps;
  ps.add("b", Tensor::zeros({1}));
  ps.add("a", Tensor::zeros({2}));
  EXPECT_THROW(ps.add("a", Tensor::zeros({1})), std::invalid_argument);
  std::vector<std::string> names;
  for (const auto& [n, _] : ps) names.push_back(n);
  EXPECT_EQ(names, (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(ps.total_elements(), 3u);
}

TEST(Checkpoint, BitExactRoundTrip) {
  ParamStore ps;
  param(ps, "w", {3, 4}, 40);
  ps.add("odd", Tensor::from({3}, {-0.0, std::numeric_limits<double>::denorm_min(), 1e308}));
  std::stringstream buf;
  write_tensors(buf, ps);
  const auto loaded = read_tensors(buf);
  ASSERT_EQ(loaded.size(), 2u);
  ParamStore copy;
  copy.add("w", Tensor::zeros({3, 4}));
  copy.add("odd", Tensor::zeros({3}));
  assign_tensors(copy, loaded);
  for (const auto& name : {"w", "odd"}) {
    const auto a = ps.get(name).values(), b = copy.get(name).values();
    for (std::size_t i = 0; i < a.size(); ++i)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i]));
  }
}

TEST(Checkpoint, RejectsMismatches) {
  ParamStore ps;
  param(ps, "w", {3, 4}, 41);
  std::stringstream buf;
  write_tensors(buf, ps);
  const auto loaded = read_tensors(buf);
  ParamStore wrong_shape;
  wrong_shape.add("w", Tensor::zeros({4, 3}));
  EXPECT_THROW(assign_tensors(wrong_shape, loaded), CheckpointError);
  ParamStore wrong_name;
  wrong_name.add("v", Tensor::zeros({3, 4}));
  EXPECT_THROW(assign_tensors(wrong_name, loaded), CheckpointError);
  std::stringstream junk("not a checkpoint");
  EXPECT_THROW(read_tensors(junk), CheckpointError);
  std::string truncated = buf.str();
  std::stringstream again;
  write_tensors(again, ps);
  truncated = again.str().substr(0, again.str().size() - 5);
  std::stringstream cut(truncated);
  EXPECT_THROW(read_tensors(cut), CheckpointError);
}
