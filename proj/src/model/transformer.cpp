#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ttmba/model.hpp"

namespace ttmba {

using ag::Mask;
using ag::Tensor;

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::uint8_t> pad_bits(std::span<const int> ids) {
  std::vector<std::uint8_t> bits(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) bits[i] = ids[i] == Vocab::kPad;
  return bits;
}

constexpr double kMasked = -1e30;

}  // namespace

Transformer::Transformer(const ModelConfig& config, const FusionSpec& fusion, std::uint64_t seed)
    : config_(config), fusion_(fusion), init_rng_(seed), dropout_rng_(seed ^ 0xd20f0u) {
  config_.validate();
  fusion_.validate();
  const std::size_t d = config_.d_model;
  const std::size_t v = config_.vocab_size;

  auto embed = [&](const std::string& name) {
    std::vector<double> w(v * d);
    for (auto& x : w) x = normal(init_rng_);
    return params_.add(name, Tensor::from({v, d}, std::move(w), true));
  };
  src_embed_ = embed("src_embed");
  trg_embed_ = embed("trg_embed");

  for (std::size_t l = 0; l < config_.n_encoder_layers; ++l) {
    const std::string p = "enc" + std::to_string(l) + ".";
    EncoderLayer layer;
    layer.self_attn = make_attention(p + "self");
    layer.norm1 = make_norm(p + "norm1", d);
    layer.ff1 = make_linear(p + "ff1", d, config_.ffn_dim);
    layer.ff2 = make_linear(p + "ff2", config_.ffn_dim, d);
    layer.norm2 = make_norm(p + "norm2", d);
    encoder_.push_back(std::move(layer));
  }
  for (std::size_t l = 0; l < config_.n_decoder_layers; ++l) {
    const std::string p = "dec" + std::to_string(l) + ".";
    DecoderLayer layer;
    layer.self_attn = make_attention(p + "self");
    layer.norm1 = make_norm(p + "norm1", d);
    layer.cross_attn = make_attention(p + "cross");
    layer.norm2 = make_norm(p + "norm2", d);
    layer.ff1 = make_linear(p + "ff1", d, config_.ffn_dim);
    layer.ff2 = make_linear(p + "ff2", config_.ffn_dim, d);
    layer.norm3 = make_norm(p + "norm3", d);
    decoder_.push_back(std::move(layer));
  }
  out_proj_ = make_linear("out", d, v);

  if (fusion_.fused()) {
    const std::size_t f = config_.table_features(fusion_.semantics);
    if (fusion_.mode == FusionMode::HiddenConcat) {
      const std::size_t extra = config_.hidden_concat_dim ? config_.hidden_concat_dim : d;
      table_proj_ = make_linear("table_proj", f, extra);
      hidden_merge_ = make_linear("hidden_merge", d + extra, d);
    } else {
      table_proj_ = make_linear("table_proj", f, d);
    }
  }
}

Transformer::Linear Transformer::make_linear(const std::string& name, std::size_t in,
                                             std::size_t out, double gain, bool bias) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (auto& x : w) x = (2.0 * uniform01(init_rng_) - 1.0) * bound;
  Linear l;
  l.w = params_.add(name + ".w", Tensor::from({in, out}, std::move(w), true));
  if (bias) l.b = params_.add(name + ".b", Tensor::zeros({out}, true));
  return l;
}

Transformer::Norm Transformer::make_norm(const std::string& name, std::size_t d) {
  Norm n;
  n.gamma = params_.add(name + ".gamma", Tensor::from({d}, std::vector<double>(d, 1.0), true));
  n.beta = params_.add(name + ".beta", Tensor::zeros({d}, true));
  return n;
}

Transformer::Attention Transformer::make_attention(const std::string& name) {
  const std::size_t d = config_.d_model;
  // A key bias only shifts every score of a query by the same amount, so it is left out.
  return {make_linear(name + ".q", d, d), make_linear(name + ".k", d, d, 1.0, false),
          make_linear(name + ".v", d, d), make_linear(name + ".o", d, d)};
}

Tensor Transformer::apply(const Linear& l, const Tensor& x) const {
  const Tensor y = ag::matmul(x, l.w);
  return l.b.defined() ? ag::add(y, l.b) : y;
}

Tensor Transformer::apply(const Norm& n, const Tensor& x) const {
  return ag::layer_norm(x, n.gamma, n.beta, 1e-5);
}

Tensor Transformer::drop(const Tensor& x) const {
  if (!training_ || config_.dropout <= 0.0) return x;
  return ag::dropout(x, config_.dropout, dropout_rng_);
}

Tensor Transformer::attend(const Attention& a, const Tensor& xq, const Tensor& xkv,
                           const Mask& mask) const {
  const std::size_t b = xq.dim(0), sq = xq.dim(1), sk = xkv.dim(1);
  const std::size_t h = config_.n_heads, dh = config_.d_model / h;
  Tensor q = ag::permute(ag::reshape(apply(a.q, xq), {b, sq, h, dh}), {0, 2, 1, 3});
  Tensor kt = ag::permute(ag::reshape(apply(a.k, xkv), {b, sk, h, dh}), {0, 2, 3, 1});
  Tensor v = ag::permute(ag::reshape(apply(a.v, xkv), {b, sk, h, dh}), {0, 2, 1, 3});
  Tensor scores = ag::scale(ag::matmul(q, kt), 1.0 / std::sqrt(static_cast<double>(dh)));
  scores = ag::masked_fill(scores, mask, kMasked);
  Tensor ctx = ag::matmul(drop(ag::softmax(scores)), v);
  ctx = ag::reshape(ag::permute(ctx, {0, 2, 1, 3}), {b, sq, config_.d_model});
  return apply(a.o, ctx);
}

Tensor Transformer::feed_forward(const Linear& l1, const Linear& l2, const Tensor& x) const {
  return apply(l2, drop(ag::relu(apply(l1, x))));
}

Tensor Transformer::positions(std::size_t len) const {
  const std::size_t d = config_.d_model;
  std::vector<double> pe(len * d);
  for (std::size_t p = 0; p < len; ++p)
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      pe[p * d + i] = std::sin(static_cast<double>(p) * freq);
      if (i + 1 < d) pe[p * d + i + 1] = std::cos(static_cast<double>(p) * freq);
    }
  return Tensor::from({len, d}, std::move(pe));
}

Tensor Transformer::encode(std::span<const int> src, std::size_t batch, std::size_t len) const {
  if (src.size() != batch * len) throw std::invalid_argument("encode: src size is not batch * len");
  if (len > config_.max_len)
    throw std::length_error("source length " + std::to_string(len) + " exceeds max_len " +
                            std::to_string(config_.max_len));
  Tensor x = ag::add(ag::embedding(src_embed_, src, {batch, len}), positions(len));
  x = drop(x);
  const Mask mask{{batch, 1, 1, len}, pad_bits(src)};
  for (const auto& layer : encoder_) {
    x = apply(layer.norm1, ag::add(x, drop(attend(layer.self_attn, x, x, mask))));
    x = apply(layer.norm2, ag::add(x, drop(feed_forward(layer.ff1, layer.ff2, x))));
  }
  return x;
}

Memory Transformer::fuse(const Tensor& encoded, std::span<const int> src,
                         std::span<const double> table) const {
  const std::size_t b = encoded.dim(0), s = encoded.dim(1), d = config_.d_model;
  if (encoded.rank() != 3 || encoded.dim(2) != d || src.size() != b * s)
    throw ag::ShapeError("fuse: encoder output " + ag::shape_str(encoded.shape()) +
                         " does not match " + std::to_string(src.size()) + " source ids");
  Memory mem;
  mem.batch = b;
  if (!fusion_.fused()) {
    mem.states = encoded;
    mem.pad = pad_bits(src);
    mem.length = s;
    return mem;
  }
  const std::size_t f = config_.table_features(fusion_.semantics);
  if (table.size() != b * f)
    throw ag::ShapeError("fuse: expected " + std::to_string(b) + "x" + std::to_string(f) +
                         " table features, got " + std::to_string(table.size()));
  std::vector<double> scaled(table.begin(), table.end());
  for (auto& v : scaled) v *= config_.table_gain;
  const Tensor feats = Tensor::from({b, f}, std::move(scaled));
  const Tensor projected = apply(table_proj_, feats);  // [B, D] or [B, D']

  switch (fusion_.mode) {
    case FusionMode::Add: {
      mem.states = ag::add(encoded, ag::reshape(projected, {b, 1, d}));
      mem.pad = pad_bits(src);
      mem.length = s;
      return mem;
    }
    case FusionMode::HiddenConcat: {
      // Broadcast the table block over tokens via a gather of its rows.
      std::vector<int> rows(b * s);
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < s; ++j) rows[i * s + j] = static_cast<int>(i);
      const Tensor tiled = ag::embedding(projected, rows, {b, s});
      mem.states = apply(hidden_merge_, ag::concat({encoded, tiled}, 2));
      mem.pad = pad_bits(src);
      mem.length = s;
      return mem;
    }
    default: break;
  }

  // Token-level concatenation: gather rows from [encoded rows; table rows; sep].
  const std::size_t extra = fusion_.extra_tokens();
  const std::size_t out_len = s + extra;
  const Tensor sep = ag::slice(src_embed_, 0, Vocab::kSep, Vocab::kSep + 1);
  const Tensor pool = ag::concat({ag::reshape(encoded, {b * s, d}), projected, sep}, 0);
  const int table_row0 = static_cast<int>(b * s);
  const int sep_row = static_cast<int>(b * s + b);
  std::vector<int> rows;
  rows.reserve(b * out_len);
  mem.pad.reserve(b * out_len);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t real = s;
    while (real > 0 && src[i * s + real - 1] == Vocab::kPad) --real;
    std::size_t split = 0;  // number of syntax rows before the fused block
    switch (*fusion_.position) {
      case ConcatPosition::Front: split = 0; break;
      case ConcatPosition::Back: split = s; break;
      case ConcatPosition::BackFrontOfPad: split = real; break;
    }
    auto syntax = [&](std::size_t j) {
      rows.push_back(static_cast<int>(i * s + j));
      mem.pad.push_back(src[i * s + j] == Vocab::kPad);
    };
    for (std::size_t j = 0; j < split; ++j) syntax(j);
    // The separator sits between the syntax block and the table token.
    if (split == 0) {
      rows.push_back(table_row0 + static_cast<int>(i));
      mem.pad.push_back(0);
      if (fusion_.use_sep) {
        rows.push_back(sep_row);
        mem.pad.push_back(0);
      }
    } else {
      if (fusion_.use_sep) {
        rows.push_back(sep_row);
        mem.pad.push_back(0);
      }
      rows.push_back(table_row0 + static_cast<int>(i));
      mem.pad.push_back(0);
    }
    for (std::size_t j = split; j < s; ++j) syntax(j);
  }
  mem.states = ag::embedding(pool, rows, {b, out_len});
  mem.length = out_len;
  return mem;
}

Memory Transformer::encode_and_fuse(std::span<const int> src, std::size_t batch, std::size_t len,
                                    std::span<const double> table) const {
  return fuse(encode(src, batch, len), src, table);
}

Tensor Transformer::decode(std::span<const int> trg, std::size_t len, const Memory& memory) const {
  const std::size_t b = memory.batch;
  if (trg.size() != b * len) throw std::invalid_argument("decode: trg size is not batch * len");
  if (len > config_.max_len)
    throw std::length_error("target length " + std::to_string(len) + " exceeds max_len " +
                            std::to_string(config_.max_len));
  Tensor y = drop(ag::add(ag::embedding(trg_embed_, trg, {b, len}), positions(len)));
  Mask causal{{1, 1, len, len}, std::vector<std::uint8_t>(len * len, 0)};
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = i + 1; j < len; ++j) causal.bits[i * len + j] = 1;
  const Mask cross{{b, 1, 1, memory.length}, memory.pad};
  for (const auto& layer : decoder_) {
    y = apply(layer.norm1, ag::add(y, drop(attend(layer.self_attn, y, y, causal))));
    y = apply(layer.norm2, ag::add(y, drop(attend(layer.cross_attn, y, memory.states, cross))));
    y = apply(layer.norm3, ag::add(y, drop(feed_forward(layer.ff1, layer.ff2, y))));
  }
  return apply(out_proj_, y);
}

std::vector<std::vector<int>> Transformer::greedy_decode(std::span<const int> src, std::size_t batch,
                                                         std::size_t len, std::span<const double> table,
                                                         std::size_t max_steps) const {
  ag::NoGradGuard no_grad;
  const Memory mem = encode_and_fuse(src, batch, len, table);
  const std::size_t v = config_.vocab_size;
  max_steps = std::min(max_steps, config_.max_len - 1);
  std::vector<std::vector<int>> prefix(batch, std::vector<int>{Vocab::kBos});
  std::vector<std::vector<int>> out(batch);
  std::vector<bool> done(batch, false);
  std::size_t remaining = batch;
  for (std::size_t step = 0; step < max_steps && remaining > 0; ++step) {
    const std::size_t u = step + 1;
    std::vector<int> flat;
    flat.reserve(batch * u);
    for (const auto& p : prefix) flat.insert(flat.end(), p.begin(), p.end());
    const Tensor logits = decode(flat, u, mem);
    const auto vals = logits.values();
    for (std::size_t i = 0; i < batch; ++i) {
      const double* row = vals.data() + (i * u + step) * v;
      int best = 0;
      for (std::size_t j = 1; j < v; ++j)
        if (row[j] > row[best]) best = static_cast<int>(j);
      prefix[i].push_back(done[i] ? Vocab::kPad : best);
      if (done[i]) continue;
      if (best == Vocab::kEos) {
        done[i] = true;
        --remaining;
      } else {
        out[i].push_back(best);
      }
    }
  }
  return out;
}

}  // namespace ttmba
