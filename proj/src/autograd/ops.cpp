#include <algorithm>
#include <cmath>
#include <limits>

#include "ttmba/kernels.hpp"
#include "ttmba/tensor.hpp"

namespace ttmba::ag {

namespace {

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (grad_enabled()) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      n->requires_grad = true;
      for (auto& t : inputs) n->parents.push_back(t.ptr());
      n->backward = std::move(backward_fn);
    }
  }
  return Tensor(std::move(n));
}

// Gradient slot of parent i, or nullptr when it does not take gradients.
double* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.ensure_grad().data() : nullptr;
}

Shape broadcast_shape(const std::string& op, const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i + a.size() >= r ? a[i + a.size() - r] : 1;
    const std::size_t db = i + b.size() >= r ? b[i + b.size() - r] : 1;
    if (da != db && da != 1 && db != 1) throw ShapeError(op, a, b);
    out[i] = std::max(da, db);
  }
  return out;
}

// For each flat index of `out`, the flat index of the broadcast operand.
std::vector<std::size_t> broadcast_index(const Shape& out, const Shape& in) {
  const std::size_t r = out.size();
  std::vector<std::size_t> stride(r, 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    const std::size_t oi = i + r - in.size();
    stride[oi] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  const std::size_t total = numel(out);
  std::vector<std::size_t> idx(total);
  std::vector<std::size_t> counter(r, 0);
  std::size_t cur = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    idx[flat] = cur;
    for (std::size_t d = r; d-- > 0;) {
      ++counter[d];
      cur += stride[d];
      if (counter[d] < out[d]) break;
      cur -= stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return idx;
}

bool is_suffix(const Shape& full, const Shape& part) {
  if (part.size() > full.size()) return false;
  return std::equal(part.begin(), part.end(), full.end() - static_cast<std::ptrdiff_t>(part.size()));
}

std::size_t last_dim(const Shape& s) { return s.empty() ? 1 : s.back(); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul", a.shape(), b.shape());
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t k = a.shape().back();
  const std::size_t n = b.shape().back();
  if (b.shape()[b.rank() - 2] != k) throw ShapeError("matmul", a.shape(), b.shape());

  if (b.rank() == 2) {
    const std::size_t rows = a.numel() / k;
    Shape out_shape = a.shape();
    out_shape.back() = n;
    std::vector<double> out(rows * n, 0.0);
    kernels::gemm_nn(rows, n, k, a.values().data(), b.values().data(), out.data());
    return make_result(std::move(out_shape), std::move(out), {a, b}, [rows, n, k](Node& self) {
      const Node& pa = *self.parents[0];
      const Node& pb = *self.parents[1];
      if (double* da = parent_grad(self, 0))
        kernels::gemm_nt(rows, k, n, self.grad.data(), pb.value.data(), da);
      if (double* db = parent_grad(self, 1))
        kernels::gemm_tn(k, n, rows, pa.value.data(), self.grad.data(), db);
    });
  }

  if (a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()))
    throw ShapeError("matmul", a.shape(), b.shape());
  const std::size_t batch = a.numel() / (m * k);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t i = 0; i < batch; ++i)
    kernels::gemm_nn(m, n, k, a.values().data() + i * m * k, b.values().data() + i * k * n,
                     out.data() + i * m * n);
  return make_result(std::move(out_shape), std::move(out), {a, b}, [batch, m, n, k](Node& self) {
    const Node& pa = *self.parents[0];
    const Node& pb = *self.parents[1];
    double* da = parent_grad(self, 0);
    double* db = parent_grad(self, 1);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* g = self.grad.data() + i * m * n;
      if (da) kernels::gemm_nt(m, k, n, g, pb.value.data() + i * k * n, da + i * m * k);
      if (db) kernels::gemm_tn(k, n, m, pa.value.data() + i * m * k, g, db + i * k * n);
    }
  });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const std::size_t r = a.rank();
  if (axes.size() != r) throw ShapeError("permute: axis count does not match rank of " + shape_str(a.shape()));
  std::vector<bool> used(r, false);
  for (auto ax : axes) {
    if (ax >= r || used[ax]) throw ShapeError("permute: invalid axes for " + shape_str(a.shape()));
    used[ax] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = a.shape()[axes[i]];
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * a.shape()[i];
  // map[out_flat] = in_flat
  const std::size_t total = a.numel();
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> counter(r, 0);
  std::size_t cur = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    map[flat] = cur;
    for (std::size_t d = r; d-- > 0;) {
      ++counter[d];
      cur += in_stride[axes[d]];
      if (counter[d] < out_shape[d]) break;
      cur -= in_stride[axes[d]] * counter[d];
      counter[d] = 0;
    }
  }
  std::vector<double> out(total);
  const auto in = a.values();
  for (std::size_t i = 0; i < total; ++i) out[i] = in[map[i]];
  return make_result(std::move(out_shape), std::move(out), {a},
                     [map = std::move(map)](Node& self) {
                       double* da = parent_grad(self, 0);
                       for (std::size_t i = 0; i < map.size(); ++i) da[map[i]] += self.grad[i];
                     });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("transpose: rank < 2 for " + shape_str(a.shape()));
  std::vector<std::size_t> axes(a.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(a, axes);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) throw ShapeError("reshape", a.shape(), shape);
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    double* da = parent_grad(self, 0);
    kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(), da);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.numel());
    kernels::active().add(out.size(), a.values().data(), b.values().data(), out.data());
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
      for (std::size_t i = 0; i < 2; ++i)
        if (double* d = parent_grad(self, i))
          kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(), d);
    });
  }
  if (is_suffix(a.shape(), b.shape())) {
    // Bias-style broadcast of b over the leading axes of a.
    const std::size_t inner = b.numel();
    const std::size_t outer = inner == 0 ? 0 : a.numel() / inner;
    std::vector<double> out(a.numel());
    for (std::size_t o = 0; o < outer; ++o)
      kernels::active().add(inner, a.values().data() + o * inner, b.values().data(),
                            out.data() + o * inner);
    return make_result(a.shape(), std::move(out), {a, b}, [outer, inner](Node& self) {
      if (double* da = parent_grad(self, 0))
        kernels::active().axpy(self.grad.size(), 1.0, self.grad.data(), da);
      if (double* db = parent_grad(self, 1))
        for (std::size_t o = 0; o < outer; ++o)
          kernels::active().axpy(inner, 1.0, self.grad.data() + o * inner, db);
    });
  }
  Shape out_shape = broadcast_shape("add", a.shape(), b.shape());
  auto ia = broadcast_index(out_shape, a.shape());
  auto ib = broadcast_index(out_shape, b.shape());
  std::vector<double> out(ia.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[ia[i]] + b.values()[ib[i]];
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [ia = std::move(ia), ib = std::move(ib)](Node& self) {
                       if (double* da = parent_grad(self, 0))
                         for (std::size_t i = 0; i < ia.size(); ++i) da[ia[i]] += self.grad[i];
                       if (double* db = parent_grad(self, 1))
                         for (std::size_t i = 0; i < ib.size(); ++i) db[ib[i]] += self.grad[i];
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Shape out_shape = broadcast_shape("mul", a.shape(), b.shape());
  auto ia = broadcast_index(out_shape, a.shape());
  auto ib = broadcast_index(out_shape, b.shape());
  std::vector<double> out(ia.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[ia[i]] * b.values()[ib[i]];
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [ia = std::move(ia), ib = std::move(ib)](Node& self) {
                       const auto& va = self.parents[0]->value;
                       const auto& vb = self.parents[1]->value;
                       if (double* da = parent_grad(self, 0))
                         for (std::size_t i = 0; i < ia.size(); ++i) da[ia[i]] += self.grad[i] * vb[ib[i]];
                       if (double* db = parent_grad(self, 1))
                         for (std::size_t i = 0; i < ib.size(); ++i) db[ib[i]] += self.grad[i] * va[ia[i]];
                     });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= s;
  return make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    double* da = parent_grad(self, 0);
    kernels::active().axpy(self.grad.size(), s, self.grad.data(), da);
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw ShapeError("concat: axis out of range for " + shape_str(ref));
  std::size_t outer = 1, inner = 1, total_axis = 0;
  for (std::size_t i = 0; i < axis; ++i) outer *= ref[i];
  for (std::size_t i = axis + 1; i < ref.size(); ++i) inner *= ref[i];
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      if (i != axis && s[i] != ref[i]) ok = false;
    if (!ok) throw ShapeError("concat", ref, s);
    widths.push_back(s[axis] * inner);
    total_axis += s[axis];
  }
  Shape out_shape = ref;
  out_shape[axis] = total_axis;
  const std::size_t row = total_axis * inner;
  std::vector<double> out(outer * row);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const double* src = parts[p].values().data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src + o * widths[p], widths[p], out.data() + o * row + offset);
    offset += widths[p];
  }
  return make_result(std::move(out_shape), std::move(out), parts,
                     [outer, row, widths = std::move(widths)](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t p = 0; p < widths.size(); ++p) {
                         if (double* d = parent_grad(self, p))
                           for (std::size_t o = 0; o < outer; ++o)
                             kernels::active().axpy(widths[p], 1.0, self.grad.data() + o * row + off,
                                                    d + o * widths[p]);
                         off += widths[p];
                       }
                     });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (axis >= s.size() || begin > end || end > s[axis])
    throw ShapeError("slice: [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " of " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t in_row = s[axis] * inner;
  const std::size_t out_row = (end - begin) * inner;
  const std::size_t off = begin * inner;
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  std::vector<double> out(outer * out_row);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(a.values().data() + o * in_row + off, out_row, out.data() + o * out_row);
  return make_result(std::move(out_shape), std::move(out), {a},
                     [outer, in_row, out_row, off](Node& self) {
                       double* da = parent_grad(self, 0);
                       for (std::size_t o = 0; o < outer; ++o)
                         kernels::active().axpy(out_row, 1.0, self.grad.data() + o * out_row,
                                                da + o * in_row + off);
                     });
}

Tensor embedding(const Tensor& table, std::span<const int> ids, const Shape& index_shape) {
  if (table.rank() != 2) throw ShapeError("embedding: table must be [V, D], got " + shape_str(table.shape()));
  if (numel(index_shape) != ids.size())
    throw ShapeError("embedding: " + std::to_string(ids.size()) + " ids do not fill " + shape_str(index_shape));
  const std::size_t vocab = table.dim(0);
  const std::size_t d = table.dim(1);
  std::vector<int> idv(ids.begin(), ids.end());
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < idv.size(); ++i) {
    if (idv[i] < 0 || static_cast<std::size_t>(idv[i]) >= vocab)
      throw std::out_of_range("embedding: id " + std::to_string(idv[i]) + " outside vocabulary of " +
                              std::to_string(vocab));
    std::copy_n(table.values().data() + static_cast<std::size_t>(idv[i]) * d, d, out.data() + i * d);
  }
  Shape out_shape = index_shape;
  out_shape.push_back(d);
  return make_result(std::move(out_shape), std::move(out), {table},
                     [idv = std::move(idv), d](Node& self) {
                       double* dt = parent_grad(self, 0);
                       for (std::size_t i = 0; i < idv.size(); ++i)
                         kernels::active().axpy(d, 1.0, self.grad.data() + i * d,
                                                dt + static_cast<std::size_t>(idv[i]) * d);
                     });
}

Tensor softmax(const Tensor& a) {
  const std::size_t d = last_dim(a.shape());
  const std::size_t rows = d == 0 ? 0 : a.numel() / d;
  std::vector<double> out(a.numel());
  const auto in = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * d;
    double* y = out.data() + r * d;
    const double mx = *std::max_element(x, x + d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += (y[j] = std::exp(x[j] - mx));
    const double inv = 1.0 / s;
    for (std::size_t j = 0; j < d; ++j) y[j] *= inv;
  }
  return make_result(a.shape(), std::move(out), {a}, [rows, d](Node& self) {
    double* da = parent_grad(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * d;
      const double* g = self.grad.data() + r * d;
      double dotp = 0.0;
      for (std::size_t j = 0; j < d; ++j) dotp += g[j] * y[j];
      for (std::size_t j = 0; j < d; ++j) da[r * d + j] += y[j] * (g[j] - dotp);
    }
  });
}

Tensor log_softmax(const Tensor& a) {
  const std::size_t d = last_dim(a.shape());
  const std::size_t rows = d == 0 ? 0 : a.numel() / d;
  std::vector<double> out(a.numel());
  const auto in = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * d;
    const double mx = *std::max_element(x, x + d);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += std::exp(x[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = x[j] - lse;
  }
  return make_result(a.shape(), std::move(out), {a}, [rows, d](Node& self) {
    double* da = parent_grad(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * d;
      const double* g = self.grad.data() + r * d;
      double gs = 0.0;
      for (std::size_t j = 0; j < d; ++j) gs += g[j];
      for (std::size_t j = 0; j < d; ++j) da[r * d + j] += g[j] - std::exp(y[j]) * gs;
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = last_dim(x.shape());
  if (gamma.numel() != d || beta.numel() != d) throw ShapeError("layer_norm", x.shape(), gamma.shape());
  const std::size_t rows = d == 0 ? 0 : x.numel() / d;
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> rstd(rows);
  const auto in = x.values();
  const auto g = gamma.values();
  const auto b = beta.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in.data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mean) * rstd[r];
      xhat[r * d + j] = h;
      out[r * d + j] = h * g[j] + b[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](Node& self) {
                       const auto& gv = self.parents[1]->value;
                       double* dx = parent_grad(self, 0);
                       double* dg = parent_grad(self, 1);
                       double* db = parent_grad(self, 2);
                       std::vector<double> dh(d);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* gr = self.grad.data() + r * d;
                         const double* hr = xhat.data() + r * d;
                         if (dg)
                           for (std::size_t j = 0; j < d; ++j) dg[j] += gr[j] * hr[j];
                         if (db)
                           for (std::size_t j = 0; j < d; ++j) db[j] += gr[j];
                         if (!dx) continue;
                         double mean_dh = 0.0, mean_dh_h = 0.0;
                         for (std::size_t j = 0; j < d; ++j) {
                           dh[j] = gr[j] * gv[j];
                           mean_dh += dh[j];
                           mean_dh_h += dh[j] * hr[j];
                         }
                         mean_dh /= static_cast<double>(d);
                         mean_dh_h /= static_cast<double>(d);
                         for (std::size_t j = 0; j < d; ++j)
                           dx[r * d + j] += rstd[r] * (dh[j] - mean_dh - hr[j] * mean_dh_h);
                       }
                     });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    double* da = parent_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (self.value[i] > 0.0) da[i] += self.grad[i];
  });
}

Tensor masked_fill(const Tensor& a, const Mask& mask, double value) {
  if (numel(mask.shape) != mask.bits.size())
    throw ShapeError("masked_fill: mask bits do not fill " + shape_str(mask.shape));
  const Shape out_shape = broadcast_shape("masked_fill", a.shape(), mask.shape);
  if (out_shape != a.shape()) throw ShapeError("masked_fill", a.shape(), mask.shape);
  std::vector<std::uint8_t> full(a.numel());
  if (mask.shape == a.shape()) {
    std::transform(mask.bits.begin(), mask.bits.end(), full.begin(),
                   [](std::uint8_t b) { return static_cast<std::uint8_t>(b != 0); });
  } else {
    const auto idx = broadcast_index(a.shape(), mask.shape);
    for (std::size_t i = 0; i < full.size(); ++i) full[i] = mask.bits[idx[i]] != 0;
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (full[i]) out[i] = value;
  return make_result(a.shape(), std::move(out), {a}, [full = std::move(full)](Node& self) {
    double* da = parent_grad(self, 0);
    for (std::size_t i = 0; i < full.size(); ++i)
      if (!full[i]) da[i] += self.grad[i];
  });
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> factor(a.numel());
  for (auto& f : factor) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    f = u < rate ? 0.0 : keep_scale;
  }
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor[i];
  return make_result(a.shape(), std::move(out), {a}, [factor = std::move(factor)](Node& self) {
    double* da = parent_grad(self, 0);
    for (std::size_t i = 0; i < factor.size(); ++i) da[i] += self.grad[i] * factor[i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({}, {s}, {a}, [](Node& self) {
    double* da = parent_grad(self, 0);
    const double g = self.grad[0];
    const std::size_t n = self.parents[0]->value.size();
    for (std::size_t i = 0; i < n; ++i) da[i] += g;
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size())
    throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(targets.size()) + " targets");
  const std::size_t n = logits.dim(0);
  const std::size_t v = logits.dim(1);
  std::vector<int> tg(targets.begin(), targets.end());
  std::size_t counted = 0;
  for (int t : tg) {
    if (t == ignore_index) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= v)
      throw std::out_of_range("cross_entropy: target " + std::to_string(t) + " outside [0," +
                              std::to_string(v) + ")");
    ++counted;
  }
  std::vector<double> probs(n * v, 0.0);
  double total = 0.0;
  const auto x = logits.values();
  for (std::size_t r = 0; r < n; ++r) {
    if (tg[r] == ignore_index) continue;
    const double* xr = x.data() + r * v;
    const double mx = *std::max_element(xr, xr + v);
    double s = 0.0;
    for (std::size_t j = 0; j < v; ++j) s += (probs[r * v + j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < v; ++j) probs[r * v + j] /= s;
    total -= xr[tg[r]] - mx - std::log(s);
  }
  const double denom = counted == 0 ? 1.0 : static_cast<double>(counted);
  return make_result({}, {total / denom}, {logits},
                     [tg = std::move(tg), probs = std::move(probs), n, v, denom,
                      ignore_index](Node& self) {
                       double* dl = parent_grad(self, 0);
                       const double g = self.grad[0] / denom;
                       for (std::size_t r = 0; r < n; ++r) {
                         if (tg[r] == ignore_index) continue;
                         for (std::size_t j = 0; j < v; ++j) dl[r * v + j] += g * probs[r * v + j];
                         dl[r * v + static_cast<std::size_t>(tg[r])] -= g;
                       }
                     });
}

}  // namespace ttmba::ag
