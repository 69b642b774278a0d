#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "ttmba/checkpoint.hpp"
#include "ttmba/model.hpp"

using namespace ttmba;
using ag::Tensor;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_encoder_layers = 1;
  c.n_decoder_layers = 1;
  c.ffn_dim = 16;
  c.vocab_size = 12;
  c.max_len = 16;
  c.max_vars = 2;
  return c;
}

std::vector<FusionSpec> all_specs() {
  std::vector<FusionSpec> out{FusionSpec::vanilla(), FusionSpec::add(Semantics::ExtendedTT),
                              FusionSpec::hidden(Semantics::Both)};
  for (auto p : {ConcatPosition::Front, ConcatPosition::Back, ConcatPosition::BackFrontOfPad})
    for (bool sep : {false, true}) out.push_back(FusionSpec::token(Semantics::BoolTT, p, sep));
  return out;
}

std::vector<double> features(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// Two sources of length 5; the second ends in padding.
const std::vector<int> kSrc{4, 5, 6, 7, 2, 8, 9, 2, 0, 0};
const std::vector<int> kTrg{1, 4, 5, 6, 1, 7, 8, 9};

}  // namespace

TEST(VocabTest, RoundTripAndSpecials) {
  const Vocab v;
  EXPECT_EQ(Vocab::kPad, 0);
  EXPECT_EQ(v.size(), 49u);
  const std::string s = "-3*(x&~y)+(t|z)^17";
  EXPECT_EQ(v.decode(v.encode(s)), s);
  EXPECT_EQ(v.token(Vocab::kSep), "<sep>");
  EXPECT_THROW(v.encode("x,y"), std::invalid_argument);
  const std::vector<int> with_specials{Vocab::kBos, v.encode("x")[0], Vocab::kEos, Vocab::kPad};
  EXPECT_EQ(v.decode(with_specials), "x");
}

TEST(FusionSpecTest, PositionOnlyForTokenConcat) {
  FusionSpec f = FusionSpec::add(Semantics::BoolTT);
  f.position = ConcatPosition::Front;
  EXPECT_THROW(f.validate(), std::invalid_argument);
  FusionSpec g = FusionSpec::hidden(Semantics::BoolTT);
  g.use_sep = true;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  FusionSpec h;
  h.mode = FusionMode::TokenConcat;
  EXPECT_THROW(h.validate(), std::invalid_argument);
  EXPECT_NO_THROW(FusionSpec::token(Semantics::Both, ConcatPosition::Back, true).validate());
  EXPECT_EQ(parse_position("back-front-of-pad"), ConcatPosition::BackFrontOfPad);
  EXPECT_THROW(parse_semantics("extended"), std::invalid_argument);
}

TEST(ModelConfigTest, Validation) {
  ModelConfig c = tiny_config();
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  const ModelConfig p = ModelConfig::full_scale();
  EXPECT_EQ(p.d_model, 256u);
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(ModelConfig::desk().d_model, 64u);
}

TEST(Encoder, ShapeAndBatchIndependence) {
  const Transformer m(tiny_config(), FusionSpec::vanilla(), 1);
  const Tensor h = m.encode(kSrc, 2, 5);
  EXPECT_EQ(h.shape(), (ag::Shape{2, 5, 8}));
  std::vector<int> swapped(kSrc.begin() + 5, kSrc.end());
  swapped.insert(swapped.end(), kSrc.begin(), kSrc.begin() + 5);
  const auto a = vals(h), b = vals(m.encode(swapped, 2, 5));
  for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(a[i], b[(i + 40) % 80]);
}

TEST(Encoder, AttentionIsBidirectional) {
  const Transformer m(tiny_config(), FusionSpec::vanilla(), 2);
  std::vector<int> src{4, 5, 6, 7, 2};
  const auto a = vals(m.encode(src, 1, 5));
  src[3] = 10;
  const auto b = vals(m.encode(src, 1, 5));
  for (std::size_t pos = 0; pos < 5; ++pos) {
    double diff = 0.0;
    for (std::size_t j = 0; j < 8; ++j) diff += std::abs(a[pos * 8 + j] - b[pos * 8 + j]);
    EXPECT_GT(diff, 1e-9) << "position " << pos;
  }
}

TEST(Encoder, RejectsOverlongInput) {
  const Transformer m(tiny_config(), FusionSpec::vanilla(), 3);
  const std::vector<int> src(17, 4);
  EXPECT_THROW(m.encode(src, 1, 17), std::length_error);
}

TEST(Fusion, OutputLengths) {
  const ModelConfig c = tiny_config();
  for (const auto& spec : all_specs()) {
    const Transformer m(c, spec, 4);
    const auto t = features(2 * c.table_features(spec.semantics), 5);
    const Memory mem = m.encode_and_fuse(kSrc, 2, 5, t);
    EXPECT_EQ(mem.length, 5 + spec.extra_tokens());
    EXPECT_EQ(mem.states.shape(), (ag::Shape{2, 5 + spec.extra_tokens(), 8}));
    EXPECT_EQ(mem.pad.size(), 2 * mem.length);
  }
  EXPECT_EQ(FusionSpec::token(Semantics::BoolTT, ConcatPosition::Front, false).extra_tokens(), 1u);
  EXPECT_EQ(FusionSpec::token(Semantics::BoolTT, ConcatPosition::Front, true).extra_tokens(), 2u);
}

TEST(Fusion, TokenPlacement) {
  const ModelConfig c = tiny_config();
  const auto t = features(2 * 4, 6);
  auto pads = [&](ConcatPosition p, bool sep) {
    const Transformer m(c, FusionSpec::token(Semantics::BoolTT, p, sep), 7);
    return m.encode_and_fuse(kSrc, 2, 5, t).pad;
  };
  using P = ConcatPosition;
  // Row 0 has no padding; row 1 is "8 9 <eos> <pad> <pad>".
  EXPECT_EQ(pads(P::Front, false), (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1}));
  EXPECT_EQ(pads(P::Back, false), (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0}));
  EXPECT_EQ(pads(P::Back, true), (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0, 0}));
  EXPECT_EQ(pads(P::BackFrontOfPad, false), (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1}));
  EXPECT_EQ(pads(P::BackFrontOfPad, true), (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1}));
}

TEST(Fusion, TableTokenCarriesProjection) {
  const ModelConfig c = tiny_config();
  const Transformer m(c, FusionSpec::token(Semantics::BoolTT, ConcatPosition::Front, true), 8);
  const auto t = features(4, 9);
  const Memory mem = m.encode_and_fuse(std::vector<int>{4, 5, 2}, 1, 3, t);
  const auto& w = m.params().get("table_proj.w");
  const auto& b = m.params().get("table_proj.b");
  const auto& sep = m.params().get("src_embed");
  const auto s = vals(mem.states);
  for (std::size_t j = 0; j < 8; ++j) {
    double expect = b.values()[j];
    for (std::size_t i = 0; i < 4; ++i) expect += c.table_gain * t[i] * w.values()[i * 8 + j];
    EXPECT_NEAR(s[j], expect, 1e-12);
    EXPECT_EQ(s[8 + j], sep.values()[Vocab::kSep * 8 + j]);
  }
}

TEST(Fusion, AddWithZeroTableIsIdentity) {
  const Transformer m(tiny_config(), FusionSpec::add(Semantics::ExtendedTT), 10);
  const Tensor h = m.encode(kSrc, 2, 5);
  const Memory mem = m.fuse(h, kSrc, std::vector<double>(8, 0.0));
  EXPECT_EQ(vals(mem.states), vals(h));
}

TEST(Fusion, WrongFeatureLengthRejected) {
  const Transformer m(tiny_config(), FusionSpec::add(Semantics::Both), 11);
  EXPECT_THROW(m.encode_and_fuse(kSrc, 2, 5, features(8, 1)), ag::ShapeError);
}

TEST(Decoder, LogitsShapeAndNormalizedOutputs) {
  const Transformer m(tiny_config(), FusionSpec::vanilla(), 12);
  const Tensor logits = m.decode(kTrg, 4, m.encode_and_fuse(kSrc, 2, 5, {}));
  EXPECT_EQ(logits.shape(), (ag::Shape{2, 4, 12}));
  const auto p = vals(ag::softmax(logits));
  for (std::size_t r = 0; r < 8; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < 12; ++j) total += p[r * 12 + j];
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Decoder, Causality) {
  for (const auto& spec : all_specs()) {
    const Transformer m(tiny_config(), spec, 13);
    const auto t = features(2 * tiny_config().table_features(spec.semantics), 14);
    const Memory mem = m.encode_and_fuse(kSrc, 2, 5, t);
    std::vector<int> trg = kTrg;
    const auto a = vals(m.decode(trg, 4, mem));
    trg[2] = 11;
    const auto b = vals(m.decode(trg, 4, mem));
    for (std::size_t pos = 0; pos < 4; ++pos) {
      double diff = 0.0;
      for (std::size_t j = 0; j < 12; ++j) diff += std::abs(a[pos * 12 + j] - b[pos * 12 + j]);
      if (pos < 2)
        EXPECT_EQ(diff, 0.0) << to_string(spec.mode) << " pos " << pos;
      else
        EXPECT_GT(diff, 0.0) << to_string(spec.mode) << " pos " << pos;
    }
  }
}

TEST(Decoder, TableReachesLogits) {
  for (const auto& spec : all_specs()) {
    if (!spec.fused()) continue;
    const Transformer m(tiny_config(), spec, 15);
    const std::size_t f = tiny_config().table_features(spec.semantics);
    const auto a = vals(m.decode(kTrg, 4, m.encode_and_fuse(kSrc, 2, 5, features(2 * f, 16))));
    const auto b = vals(m.decode(kTrg, 4, m.encode_and_fuse(kSrc, 2, 5, features(2 * f, 17))));
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
    EXPECT_GT(diff, 1e-6) << to_string(spec.mode);
  }
}

TEST(Greedy, TerminatesAndIsDeterministic) {
  for (const auto& spec : all_specs()) {
    const Transformer m(tiny_config(), spec, 18);
    const auto t = features(2 * tiny_config().table_features(spec.semantics), 19);
    const auto a = m.greedy_decode(kSrc, 2, 5, t, 50);
    ASSERT_EQ(a.size(), 2u);
    for (const auto& seq : a) {
      EXPECT_LE(seq.size(), tiny_config().max_len - 1);
      for (int id : seq) EXPECT_NE(id, Vocab::kEos);
    }
    EXPECT_EQ(a, m.greedy_decode(kSrc, 2, 5, t, 50));
    EXPECT_LE(m.greedy_decode(kSrc, 2, 5, t, 3)[0].size(), 3u);
  }
}

TEST(Greedy, PaddingInvariance) {
  const ModelConfig c = tiny_config();
  const std::vector<FusionSpec> specs{FusionSpec::vanilla(), FusionSpec::add(Semantics::ExtendedTT),
                                      FusionSpec::token(Semantics::ExtendedTT, ConcatPosition::Front, false),
                                      FusionSpec::token(Semantics::ExtendedTT, ConcatPosition::Front, true),
                                      FusionSpec::token(Semantics::ExtendedTT, ConcatPosition::BackFrontOfPad, false),
                                      FusionSpec::token(Semantics::ExtendedTT, ConcatPosition::BackFrontOfPad, true)};
  for (const auto& spec : specs) {
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
      const Transformer m(c, spec, seed);
      const auto t = features(c.table_features(spec.semantics), seed);
      const std::vector<int> src{4, 9, 6, 2};
      const auto base = m.greedy_decode(src, 1, 4, t, 12);
      for (std::size_t pads = 1; pads <= 6; ++pads) {
        std::vector<int> padded = src;
        padded.resize(4 + pads, Vocab::kPad);
        EXPECT_EQ(m.greedy_decode(padded, 1, padded.size(), t, 12), base) << to_string(spec.mode) << " pads " << pads;
      }
    }
  }
}

TEST(GradCheck, TinyModelEveryMode) {
  const ModelConfig c = tiny_config();
  for (const auto& spec : all_specs()) {
    Transformer m(c, spec, 30);
    const auto t = features(2 * c.table_features(spec.semantics), 31);
    const std::vector<int> out{4, 5, 6, 2, 7, 8, 9, 2};
    auto f = [&] {
      const Tensor logits = m.decode(kTrg, 4, m.encode_and_fuse(kSrc, 2, 5, t));
      return ag::cross_entropy(ag::reshape(logits, {8, 12}), out, Vocab::kPad);
    };
    // Every coordinate; a 1e-4 step keeps roundoff on near-zero gradients below the tolerance.
    EXPECT_LT(ag::grad_check(f, m.params(), 1e-4, 1u << 20), 1e-4) << to_string(spec.mode);
  }
}

TEST(Checkpoint, SaveLoadBitExact) {
  const auto path = std::filesystem::temp_directory_path() / "ttmba_model_test.bin";
  const ModelConfig c = tiny_config();
  const FusionSpec spec = FusionSpec::token(Semantics::Both, ConcatPosition::BackFrontOfPad, true);
  const Transformer m(c, spec, 40);
  save_model(m, path);
  const Transformer loaded = load_model(path);
  EXPECT_EQ(loaded.fusion(), spec);
  EXPECT_EQ(config_header(loaded.config(), loaded.fusion()), config_header(c, spec));
  auto it = loaded.params().begin();
  for (const auto& [name, t] : m.params()) {
    EXPECT_EQ(it->first, name);
    const auto a = t.values(), b = it->second.values();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i]));
    ++it;
  }
  const auto t = features(2 * c.table_features(spec.semantics), 41);
  EXPECT_EQ(m.greedy_decode(kSrc, 2, 5, t, 10), loaded.greedy_decode(kSrc, 2, 5, t, 10));
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsGarbage) {
  const auto path = std::filesystem::temp_directory_path() / "ttmba_model_garbage.bin";
  {
    std::ofstream out(path);
    out << "hello\n";
  }
  EXPECT_THROW(load_model(path), ag::CheckpointError);
  EXPECT_THROW(load_model(path.string() + ".missing"), ag::CheckpointError);
  std::filesystem::remove(path);
}
