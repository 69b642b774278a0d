#include <stdexcept>

#include "ttmba/model.hpp"

namespace ttmba {

namespace {
constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789+-*&|^~()";
}

Vocab::Vocab() : tokens_{"<pad>", "<bos>", "<eos>", "<sep>"}, char_to_id_(256, -1) {
  for (char c : kAlphabet) {
    char_to_id_[static_cast<unsigned char>(c)] = static_cast<int>(tokens_.size());
    tokens_.emplace_back(1, c);
  }
}

bool Vocab::contains(char c) const { return char_to_id_[static_cast<unsigned char>(c)] >= 0; }

std::vector<int> Vocab::encode(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const int id = char_to_id_[static_cast<unsigned char>(text[i])];
    if (id < 0)
      throw std::invalid_argument("character '" + std::string(1, text[i]) + "' at offset " +
                                  std::to_string(i) + " is not in the vocabulary");
    ids.push_back(id);
  }
  return ids;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids)
    if (id > kSep && static_cast<std::size_t>(id) < tokens_.size()) out += tokens_[static_cast<std::size_t>(id)];
  return out;
}

std::vector<int> encode_source(const Vocab& vocab, std::string_view text) {
  auto ids = vocab.encode(text);
  ids.push_back(Vocab::kEos);
  return ids;
}

void FusionSpec::validate() const {
  if (mode == FusionMode::TokenConcat) {
    if (!position) throw std::invalid_argument("token-level fusion requires a concat position");
    return;
  }
  if (position) throw std::invalid_argument("concat position is only valid for token-level fusion");
  if (use_sep) throw std::invalid_argument("<sep> is only valid for token-level fusion");
}

std::size_t FusionSpec::extra_tokens() const {
  if (mode != FusionMode::TokenConcat) return 0;
  return use_sep ? 2 : 1;
}

std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::None: return "none";
    case FusionMode::Add: return "add";
    case FusionMode::TokenConcat: return "token";
    case FusionMode::HiddenConcat: return "hidden";
  }
  return "?";
}

std::string to_string(ConcatPosition p) {
  switch (p) {
    case ConcatPosition::Front: return "front";
    case ConcatPosition::Back: return "back";
    case ConcatPosition::BackFrontOfPad: return "back-front-of-pad";
  }
  return "?";
}

std::string to_string(Semantics s) {
  switch (s) {
    case Semantics::BoolTT: return "bool";
    case Semantics::ExtendedTT: return "ext";
    case Semantics::Both: return "both";
  }
  return "?";
}

FusionMode parse_fusion_mode(std::string_view s) {
  for (auto m : {FusionMode::None, FusionMode::Add, FusionMode::TokenConcat, FusionMode::HiddenConcat})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown fusion mode '" + std::string(s) + "'");
}

ConcatPosition parse_position(std::string_view s) {
  for (auto p : {ConcatPosition::Front, ConcatPosition::Back, ConcatPosition::BackFrontOfPad})
    if (s == to_string(p)) return p;
  throw std::invalid_argument("unknown concat position '" + std::string(s) + "'");
}

Semantics parse_semantics(std::string_view s) {
  for (auto x : {Semantics::BoolTT, Semantics::ExtendedTT, Semantics::Both})
    if (s == to_string(x)) return x;
  throw std::invalid_argument("unknown semantics '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    throw std::invalid_argument("d_model must be a positive multiple of n_heads");
  if (ffn_dim == 0 || vocab_size <= static_cast<std::size_t>(Vocab::kSep) || max_len < 3)
    throw std::invalid_argument("invalid model dimensions");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
  if (max_vars == 0 || max_vars > 16) throw std::invalid_argument("max_vars must be in [1, 16]");
  if (!(table_gain > 0.0)) throw std::invalid_argument("table_gain must be positive");
  if (width < 1 || width > 64) throw std::invalid_argument("width must be in [1, 64]");
}

ModelConfig ModelConfig::desk() { return {}; }

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.d_model = 256;
  c.n_heads = 8;
  c.n_encoder_layers = 3;
  c.n_decoder_layers = 3;
  c.ffn_dim = 512;
  c.max_len = 108;
  return c;
}

}  // namespace ttmba
