#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Dense float64 tensors with a dynamic reverse-mode tape. Every op that sees
// an input requiring gradients records its parents and a backward rule; the
// graph lives as long as the tensors that reference it.
namespace ttmba::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

class ShapeError : public std::invalid_argument {
public:
  ShapeError(const std::string& op, const Shape& a, const Shape& b);
  explicit ShapeError(const std::string& message);
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> values() { return node_->value; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  // Zero-filled view when no gradient has reached this tensor yet.
  std::span<const double> grad() const;
  std::span<double> grad();
  void zero_grad();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

private:
  std::shared_ptr<Node> node_;
};

// While alive, ops on this thread record no graph.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
  bool prev_;
};

bool grad_enabled();

// a: [..., M, K]; b: [K, N] (shared across the batch) or [..., K, N].
Tensor matmul(const Tensor& a, const Tensor& b);
// Swaps the last two axes.
Tensor transpose(const Tensor& a);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor reshape(const Tensor& a, Shape shape);
// Elementwise with NumPy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
// Rows of `table` [V, D] gathered by `ids`, giving index_shape + [D].
Tensor embedding(const Tensor& table, std::span<const int> ids, const Shape& index_shape);
// Along the last axis.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor relu(const Tensor& a);

// Byte mask broadcastable to the filled tensor; nonzero marks filled entries.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> bits;
};
Tensor masked_fill(const Tensor& a, const Mask& mask, double value);
Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng);
Tensor sum(const Tensor& a);

// Mean negative log-likelihood over rows whose target != ignore_index.
// logits: [N, V]; targets: N class ids.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index = -1);

// Seeds d(loss)/d(loss) = 1 and accumulates into every reachable tensor that
// requires gradients.
void backward(const Tensor& loss);

// Ordered name -> tensor mapping. Names are unique.
class ParamStore {
public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t size() const { return items_.size(); }
  std::size_t total_elements() const;
  void zero_grad();

  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// Central differences against autodiff on up to `max_coords` coordinates
// (all of them when fewer). Returns max |a-b| / max(|a|, |b|, 1e-8).
double grad_check(const std::function<Tensor()>& f, ParamStore& params, double eps = 1e-5,
                  std::size_t max_coords = 200);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

}  // namespace ttmba::ag
