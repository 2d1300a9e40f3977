#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "topo/error.hpp"

namespace topo::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;  // pushes this->grad into inputs
};

/// Shared handle onto a node. Copies alias the same storage, which is what
/// parameters need: the optimizer updates the value every graph reads.
class Tensor {
 public:
  Tensor() : node_(std::make_shared<Node>()) {}
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }
  static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }

  const Matrix& value() const { return node_->value; }
  Matrix& value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }

  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const;

  void zero_grad() { node_->grad.setZero(node_->value.rows(), node_->value.cols()); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend class Tape;
  std::shared_ptr<Node> node_;
};

/// Records differentiable operations in execution order. A tape belongs to a
/// single thread; parameters may be read by several tapes sequentially.
class Tape {
 public:
  /// Wraps `value` as an op output. Records it only when an input needs grad.
  Tensor record(Matrix value, std::vector<std::shared_ptr<Node>> inputs,
                std::function<void(Node&)> backward);

  /// Reverse sweep from a 1x1 loss. Intermediate grads are reset first, leaf
  /// grads accumulate (call zero_grad on parameters between steps).
  void backward(const Tensor& loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

// Forward ops. Each validates shapes and finiteness of its operands.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor subtract(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double s);
Tensor abs(Tape& tape, const Tensor& a);
/// a (n x m) + b (1 x m) broadcast over rows.
Tensor add_rowwise(Tape& tape, const Tensor& a, const Tensor& b);
/// a (n x m) * b (1 x m) broadcast over rows.
Tensor mul_rowwise(Tape& tape, const Tensor& a, const Tensor& b);
Tensor softmax_rows(Tape& tape, const Tensor& a);
Tensor gelu(Tape& tape, const Tensor& a);
/// Normalizes each row to zero mean and unit variance (no affine part).
Tensor layer_norm(Tape& tape, const Tensor& a, double eps = 1e-12);
/// axis 0: mean over rows (1 x m); axis 1: mean over columns (n x 1).
Tensor mean(Tape& tape, const Tensor& a, int axis);
Tensor mean_all(Tape& tape, const Tensor& a);
Tensor sum_all(Tape& tape, const Tensor& a);
Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::int64_t> indices);
/// W ⊙ mask. The mask is treated as a constant even if it requires grad.
Tensor masked_weight(Tape& tape, const Tensor& w, const Tensor& mask);
/// Mean cross-entropy of row-wise logits against integer labels.
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> labels);
/// Inverted dropout; identity when p == 0.
Tensor dropout(Tape& tape, const Tensor& a, double p, std::mt19937_64& rng);

/// Builds a scalar loss from the current parameter values.
using GraphBuilder = std::function<Tensor(Tape&)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
/// for the gradient of `f` with respect to `param`.
double gradient_check(const GraphBuilder& f, Tensor& param, double h = 1e-5);

/// Convenience form: f receives x as a differentiable leaf.
double gradient_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Matrix& x,
                      double h = 1e-5);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
  double clip_value = 0.0;    // global-norm clipping; 0 disables
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t t = 0;
};

/// One Adam update of `params` from `grads`, in place.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state);

/// Same, reading gradients from the tensors themselves.
void adam_step(std::span<const Tensor> params, AdamState& state);

}  // namespace topo::ad
