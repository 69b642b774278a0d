#include "ttmba/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace ttmba::ag {

namespace {

constexpr char kMagic[8] = {'T', 'T', 'M', 'B', 'A', 'T', 'N', 'S'};

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U)))
    throw CheckpointError("truncated tensor container");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tensors(std::ostream& out, const ParamStore& params) {
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kTensorFormatVersion);
  put_le<std::uint64_t>(out, params.size());
  for (const auto& [name, t] : params) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw CheckpointError("failed writing tensor container");
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError("not a tensor container (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kTensorFormatVersion)
    throw CheckpointError("unsupported tensor container version " + std::to_string(version));
  const auto count = get_le<std::uint64_t>(in);
  std::vector<NamedTensor> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedTensor t;
    const auto len = get_le<std::uint32_t>(in);
    if (len > (1U << 16)) throw CheckpointError("implausible tensor name length");
    t.name.resize(len);
    if (!in.read(t.name.data(), len)) throw CheckpointError("truncated tensor name");
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > 8) throw CheckpointError("implausible tensor rank for '" + t.name + "'");
    for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(get_le<std::uint64_t>(in));
    const std::size_t n = numel(t.shape);
    if (n > (std::size_t{1} << 32)) throw CheckpointError("implausible tensor size for '" + t.name + "'");
    t.values.resize(n);
    for (auto& v : t.values) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    out.push_back(std::move(t));
  }
  return out;
}

void assign_tensors(ParamStore& params, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != params.size())
    throw CheckpointError("checkpoint has " + std::to_string(tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  for (const auto& t : tensors) {
    if (!params.contains(t.name)) throw CheckpointError("unexpected tensor '" + t.name + "'");
    Tensor& dst = params.get(t.name);
    if (dst.shape() != t.shape)
      throw CheckpointError("shape mismatch for '" + t.name + "': " + shape_str(t.shape) +
                            " vs " + shape_str(dst.shape()));
    std::copy(t.values.begin(), t.values.end(), dst.values().begin());
  }
}

}  // namespace ttmba::ag
