#include <fstream>
#include <map>
#include <sstream>

#include "ttmba/checkpoint.hpp"
#include "ttmba/model.hpp"

namespace ttmba {

namespace {

constexpr std::string_view kHeaderMagic = "TTMBA-MODEL 1";

std::size_t to_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ag::CheckpointError("model header is missing '" + key + "'");
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw ag::CheckpointError("model header field '" + key + "' is not an integer: " + it->second);
  }
}

double to_double(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ag::CheckpointError("model header is missing '" + key + "'");
  try {
    return std::stod(it->second);
  } catch (const std::logic_error&) {
    throw ag::CheckpointError("model header field '" + key + "' is not a number: " + it->second);
  }
}

}  // namespace

std::string config_header(const ModelConfig& c, const FusionSpec& f) {
  std::ostringstream out;
  out.precision(17);
  out << kHeaderMagic << '\n'
      << "d_model=" << c.d_model << '\n'
      << "n_heads=" << c.n_heads << '\n'
      << "n_encoder_layers=" << c.n_encoder_layers << '\n'
      << "n_decoder_layers=" << c.n_decoder_layers << '\n'
      << "ffn_dim=" << c.ffn_dim << '\n'
      << "max_len=" << c.max_len << '\n'
      << "vocab_size=" << c.vocab_size << '\n'
      << "dropout=" << c.dropout << '\n'
      << "hidden_concat_dim=" << c.hidden_concat_dim << '\n'
      << "max_vars=" << c.max_vars << '\n'
      << "width=" << c.width << '\n'
      << "table_gain=" << c.table_gain << '\n'
      << "fusion=" << to_string(f.mode) << '\n'
      << "position=" << (f.position ? to_string(*f.position) : "-") << '\n'
      << "sep=" << (f.use_sep ? 1 : 0) << '\n'
      << "semantics=" << to_string(f.semantics) << '\n'
      << "END\n";
  return out.str();
}

void save_model(const Transformer& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ag::CheckpointError("cannot open " + path.string() + " for writing");
  out << config_header(model.config(), model.fusion());
  ag::write_tensors(out, model.params());
  out.flush();
  if (!out) throw ag::CheckpointError("failed writing " + path.string());
}

Transformer load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ag::CheckpointError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kHeaderMagic)
    throw ag::CheckpointError(path.string() + " is not a model checkpoint");
  std::map<std::string, std::string> kv;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "END") {
      ended = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ag::CheckpointError("malformed header line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  if (!ended) throw ag::CheckpointError("model header is not terminated");

  ModelConfig c;
  c.d_model = to_size(kv, "d_model");
  c.n_heads = to_size(kv, "n_heads");
  c.n_encoder_layers = to_size(kv, "n_encoder_layers");
  c.n_decoder_layers = to_size(kv, "n_decoder_layers");
  c.ffn_dim = to_size(kv, "ffn_dim");
  c.max_len = to_size(kv, "max_len");
  c.vocab_size = to_size(kv, "vocab_size");
  c.dropout = to_double(kv, "dropout");
  c.hidden_concat_dim = to_size(kv, "hidden_concat_dim");
  c.max_vars = to_size(kv, "max_vars");
  c.width = static_cast<unsigned>(to_size(kv, "width"));
  c.table_gain = to_double(kv, "table_gain");

  FusionSpec f;
  try {
    f.mode = parse_fusion_mode(kv["fusion"]);
    if (kv["position"] != "-") f.position = parse_position(kv["position"]);
    f.use_sep = to_size(kv, "sep") != 0;
    f.semantics = parse_semantics(kv["semantics"]);
    c.validate();
    f.validate();
  } catch (const std::invalid_argument& e) {
    throw ag::CheckpointError(std::string("invalid model header: ") + e.what());
  }

  Transformer model(c, f, 0);
  ag::assign_tensors(model.params(), ag::read_tensors(in));
  return model;
}

}  // namespace ttmba
