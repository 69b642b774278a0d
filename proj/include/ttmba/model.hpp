#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ttmba/tensor.hpp"
#include "ttmba/truth_table.hpp"

namespace ttmba {

// Character-level vocabulary over the expression alphabet plus four specials.
class Vocab {
public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;

  Vocab();

  std::size_t size() const { return tokens_.size(); }
  bool contains(char c) const;
  // Throws std::invalid_argument on characters outside the alphabet.
  std::vector<int> encode(std::string_view text) const;
  // Specials are dropped.
  std::string decode(std::span<const int> ids) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

private:
  std::vector<std::string> tokens_;
  std::vector<int> char_to_id_;
};

enum class FusionMode : std::uint8_t { None, Add, TokenConcat, HiddenConcat };
enum class ConcatPosition : std::uint8_t { Front, Back, BackFrontOfPad };

struct FusionSpec {
  FusionMode mode = FusionMode::None;
  // Set exactly when mode == TokenConcat.
  std::optional<ConcatPosition> position;
  // Only meaningful for TokenConcat.
  bool use_sep = false;
  Semantics semantics = Semantics::ExtendedTT;

  void validate() const;
  bool fused() const { return mode != FusionMode::None; }
  // Extra memory tokens appended by the fusion step.
  std::size_t extra_tokens() const;

  static FusionSpec vanilla() { return {}; }
  static FusionSpec add(Semantics s) { return {FusionMode::Add, std::nullopt, false, s}; }
  static FusionSpec token(Semantics s, ConcatPosition p, bool sep) {
    return {FusionMode::TokenConcat, p, sep, s};
  }
  static FusionSpec hidden(Semantics s) { return {FusionMode::HiddenConcat, std::nullopt, false, s}; }

  friend bool operator==(const FusionSpec&, const FusionSpec&) = default;
};

std::string to_string(FusionMode m);
std::string to_string(ConcatPosition p);
std::string to_string(Semantics s);
FusionMode parse_fusion_mode(std::string_view s);
ConcatPosition parse_position(std::string_view s);
Semantics parse_semantics(std::string_view s);

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_encoder_layers = 2;
  std::size_t n_decoder_layers = 2;
  std::size_t ffn_dim = 256;
  std::size_t max_len = 128;
  std::size_t vocab_size = 49;
  double dropout = 0.0;
  // Width of the hidden-dimension table block; 0 means d_model.
  std::size_t hidden_concat_dim = 0;
  std::size_t max_vars = kDefaultMaxVars;
  unsigned width = kDefaultWidth;
  // Fixed factor on table features before their projection.
  double table_gain = 128.0;

  void validate() const;
  std::size_t table_features(Semantics s) const { return feature_length(s, max_vars); }

  static ModelConfig desk();
  static ModelConfig full_scale();
};

// Encoder output after fusion, plus its key padding mask (1 = masked).
struct Memory {
  ag::Tensor states;  // [B, S', D]
  std::vector<std::uint8_t> pad;  // B * S'
  std::size_t batch = 0;
  std::size_t length = 0;
};

class Transformer {
public:
  Transformer(const ModelConfig& config, const FusionSpec& fusion, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const FusionSpec& fusion() const { return fusion_; }
  ag::ParamStore& params() { return params_; }
  const ag::ParamStore& params() const { return params_; }

  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }
  void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

  // src: B*S ids (row-major), <pad> marks padding. Returns [B, S, D].
  ag::Tensor encode(std::span<const int> src, std::size_t batch, std::size_t len) const;

  // table: B*F feature values; ignored (may be empty) when fusion is off.
  Memory fuse(const ag::Tensor& encoded, std::span<const int> src, std::span<const double> table) const;

  Memory encode_and_fuse(std::span<const int> src, std::size_t batch, std::size_t len,
                         std::span<const double> table) const;

  // trg: B*U ids starting with <bos>. Returns logits [B, U, V].
  ag::Tensor decode(std::span<const int> trg, std::size_t len, const Memory& memory) const;

  // Argmax continuation from <bos>, one output per batch row, without <bos>/<eos>.
  std::vector<std::vector<int>> greedy_decode(std::span<const int> src, std::size_t batch,
                                              std::size_t len, std::span<const double> table,
                                              std::size_t max_steps) const;

private:
  struct Linear {
    ag::Tensor w;  // [in, out]
    ag::Tensor b;  // [out], undefined when the layer has no bias
  };
  struct Norm {
    ag::Tensor gamma;
    ag::Tensor beta;
  };
  struct Attention {
    Linear q, k, v, o;
  };
  struct EncoderLayer {
    Attention self_attn;
    Norm norm1, norm2;
    Linear ff1, ff2;
  };
  struct DecoderLayer {
    Attention self_attn, cross_attn;
    Norm norm1, norm2, norm3;
    Linear ff1, ff2;
  };

  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, double gain = 1.0,
                     bool bias = true);
  Norm make_norm(const std::string& name, std::size_t d);
  Attention make_attention(const std::string& name);

  ag::Tensor apply(const Linear& l, const ag::Tensor& x) const;
  ag::Tensor apply(const Norm& n, const ag::Tensor& x) const;
  ag::Tensor attend(const Attention& a, const ag::Tensor& xq, const ag::Tensor& xkv,
                    const ag::Mask& mask) const;
  ag::Tensor feed_forward(const Linear& l1, const Linear& l2, const ag::Tensor& x) const;
  ag::Tensor drop(const ag::Tensor& x) const;
  ag::Tensor positions(std::size_t len) const;

  ModelConfig config_;
  FusionSpec fusion_;
  ag::ParamStore params_;
  std::mt19937_64 init_rng_;
  mutable std::mt19937_64 dropout_rng_;
  bool training_ = false;

  ag::Tensor src_embed_, trg_embed_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  Linear out_proj_;
  Linear table_proj_;   // F -> D (Add, TokenConcat) or F -> D' (HiddenConcat)
  Linear hidden_merge_;  // D + D' -> D (HiddenConcat only)
};

// Self-describing checkpoint: a text header with the configuration followed by
// the binary tensor container.
void save_model(const Transformer& model, const std::filesystem::path& path);
Transformer load_model(const std::filesystem::path& path);
std::string config_header(const ModelConfig& config, const FusionSpec& fusion);

// Token ids for `text` followed by <eos>.
std::vector<int> encode_source(const Vocab& vocab, std::string_view text);

}  // namespace ttmba
