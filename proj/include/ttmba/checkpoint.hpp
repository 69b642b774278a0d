#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ttmba/tensor.hpp"

namespace ttmba::ag {

// Binary tensor container, version 1, all integers little-endian:
//   "TTMBATNS" u32 version u64 count
//   count x { u32 name_len, name bytes, u32 rank, u64 dims[rank], f64 values[] }
inline constexpr std::uint32_t kTensorFormatVersion = 1;

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

void write_tensors(std::ostream& out, const ParamStore& params);
std::vector<NamedTensor> read_tensors(std::istream& in);

// Copies values into same-named tensors of `params`; names and shapes must
// match one-to-one.
void assign_tensors(ParamStore& params, const std::vector<NamedTensor>& tensors);

}  // namespace ttmba::ag
