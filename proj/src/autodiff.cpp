#include "topo/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace topo::ad {

namespace {

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + shape_str(a.value()) +
                                              " vs " + shape_str(b.value()));
}

void require_finite(const Tensor& a, const char* op) {
  if (!a.value().allFinite())
    throw Error(ErrorCode::NonFiniteInput, std::string(op) + ": operand contains NaN or Inf");
}

template <typename Expr>
void accumulate(Node& n, const Expr& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

}  // namespace

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Tensor::item() const {
  if (value().size() != 1) throw Error(ErrorCode::ShapeMismatch, "item() on non-scalar tensor");
  return value()(0, 0);
}

Tensor Tape::record(Matrix value, std::vector<std::shared_ptr<Node>> inputs,
                    std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in->requires_grad;
  if (needs) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
    nodes_.push_back(node);
  }
  return Tensor(std::move(node));
}

void Tape::backward(const Tensor& loss) {
  if (loss.value().size() != 1)
    throw Error(ErrorCode::NonScalarLoss, "loss has shape " + shape_str(loss.value()));
  for (auto& n : nodes_) {
    n->grad.resize(0, 0);
    for (auto& in : n->inputs)
      if (in->requires_grad && in->grad.size() == 0)
        in->grad.setZero(in->value.rows(), in->value.cols());
  }
  if (!loss.requires_grad()) return;
  auto& root = *loss.node();
  root.grad = Matrix::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(n);
  }
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw Error(ErrorCode::ShapeMismatch,
                "matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  require_finite(a, "matmul");
  require_finite(b, "matmul");
  Matrix out = a.value() * b.value();
  return tape.record(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) accumulate(x, self.grad * y.value.transpose());
    if (y.requires_grad) accumulate(y, x.value.transpose() * self.grad);
  });
}

Tensor transpose(Tape& tape, const Tensor& a) {
  require_finite(a, "transpose");
  Matrix out = a.value().transpose();
  return tape.record(std::move(out), {a.node()},
                     [](Node& self) { accumulate(*self.inputs[0], self.grad.transpose()); });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  require_finite(a, "add");
  require_finite(b, "add");
  Matrix out = a.value() + b.value();
  return tape.record(std::move(out), {a.node(), b.node()}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], self.grad);
  });
}

Tensor subtract(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "subtract");
  require_finite(a, "subtract");
  require_finite(b, "subtract");
  Matrix out = a.value() - b.value();
  return tape.record(std::move(out), {a.node(), b.node()}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
    accumulate(*self.inputs[1], -self.grad);
  });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  require_finite(a, "mul");
  require_finite(b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return tape.record(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& y = *self.inputs[1];
    if (x.requires_grad) accumulate(x, self.grad.cwiseProduct(y.value));
    if (y.requires_grad) accumulate(y, self.grad.cwiseProduct(x.value));
  });
}

Tensor scale(Tape& tape, const Tensor& a, double s) {
  require_finite(a, "scale");
  if (!std::isfinite(s)) throw Error(ErrorCode::NonFiniteInput, "scale: factor is not finite");
  Matrix out = a.value() * s;
  return tape.record(std::move(out), {a.node()},
                     [s](Node& self) { accumulate(*self.inputs[0], self.grad * s); });
}

Tensor abs(Tape& tape, const Tensor& a) {
  require_finite(a, "abs");
  Matrix out = a.value().cwiseAbs();
  return tape.record(std::move(out), {a.node()}, [](Node& self) {
    Node& x = *self.inputs[0];
    accumulate(x, self.grad.cwiseProduct(
                      x.value.unaryExpr([](double v) { return double((v > 0) - (v < 0)); })));
  });
}

Tensor add_rowwise(Tape& tape, const Tensor& a, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != a.cols())
    throw Error(ErrorCode::ShapeMismatch,
                "add_rowwise: " + shape_str(a.value()) + " + " + shape_str(b.value()));
  require_finite(a, "add_rowwise");
  require_finite(b, "add_rowwise");
  Matrix out = a.value().rowwise() + b.value().row(0);
  return tape.record(std::move(out), {a.node(), b.node()}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad);
    if (self.inputs[1]->requires_grad) accumulate(*self.inputs[1], self.grad.colwise().sum());
  });
}

Tensor mul_rowwise(Tape& tape, const Tensor& a, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != a.cols())
    throw Error(ErrorCode::ShapeMismatch,
                "mul_rowwise: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  require_finite(a, "mul_rowwise");
  require_finite(b, "mul_rowwise");
  Matrix out = a.value().array().rowwise() * b.value().row(0).array();
  return tape.record(std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& x = *self.inputs[0];
    Node& g = *self.inputs[1];
    if (x.requires_grad)
      accumulate(x, (self.grad.array().rowwise() * g.value.row(0).array()).matrix());
    if (g.requires_grad)
      accumulate(g, self.grad.cwiseProduct(x.value).colwise().sum());
  });
}

Tensor softmax_rows(Tape& tape, const Tensor& a) {
  require_finite(a, "softmax_rows");
  Matrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const double mx = a.value().row(i).maxCoeff();
    out.row(i) = (a.value().row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return tape.record(std::move(out), {a.node()}, [](Node& self) {
    const Matrix& y = self.value;
    Eigen::VectorXd dot = self.grad.cwiseProduct(y).rowwise().sum();
    Matrix g = (self.grad.colwise() - dot).cwiseProduct(y);
    accumulate(*self.inputs[0], g);
  });
}

Tensor gelu(Tape& tape, const Tensor& a) {
  require_finite(a, "gelu");
  Matrix out = a.value().unaryExpr(
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); });
  return tape.record(std::move(out), {a.node()}, [](Node& self) {
    const Matrix& x = self.inputs[0]->value;
    Matrix d = x.unaryExpr([](double v) {
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * v * v) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return cdf + v * pdf;
    });
    accumulate(*self.inputs[0], self.grad.cwiseProduct(d));
  });
}

Tensor layer_norm(Tape& tape, const Tensor& a, double eps) {
  require_finite(a, "layer_norm");
  const Index n = a.rows();
  const double m = double(a.cols());
  Matrix out(n, a.cols());
  Eigen::VectorXd inv_std(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = a.value().row(i).mean();
    const double var = (a.value().row(i).array() - mu).square().sum() / m;
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    out.row(i) = (a.value().row(i).array() - mu) * inv_std(i);
  }
  return tape.record(std::move(out), {a.node()}, [inv_std, m](Node& self) {
    const Matrix& y = self.value;
    const Matrix& g = self.grad;
    Matrix gx(y.rows(), y.cols());
    for (Index i = 0; i < y.rows(); ++i) {
      const double gm = g.row(i).sum() / m;
      const double gy = g.row(i).dot(y.row(i)) / m;
      gx.row(i) = inv_std(i) * (g.row(i).array() - gm - y.row(i).array() * gy);
    }
    accumulate(*self.inputs[0], gx);
  });
}

Tensor mean(Tape& tape, const Tensor& a, int axis) {
  require_finite(a, "mean");
  if (axis != 0 && axis != 1) throw Error(ErrorCode::InvalidArgument, "mean: axis must be 0 or 1");
  if (axis == 0) {
    Matrix out = a.value().colwise().mean();
    const double n = double(a.rows());
    return tape.record(std::move(out), {a.node()}, [n](Node& self) {
      const Node& x = *self.inputs[0];
      accumulate(*self.inputs[0], self.grad.replicate(x.value.rows(), 1) / n);
    });
  }
  Matrix out = a.value().rowwise().mean();
  const double n = double(a.cols());
  return tape.record(std::move(out), {a.node()}, [n](Node& self) {
    const Node& x = *self.inputs[0];
    accumulate(*self.inputs[0], self.grad.replicate(1, x.value.cols()) / n);
  });
}

Tensor mean_all(Tape& tape, const Tensor& a) {
  require_finite(a, "mean_all");
  Matrix out(1, 1);
  out(0, 0) = a.value().mean();
  const double n = double(a.value().size());
  return tape.record(std::move(out), {a.node()}, [n](Node& self) {
    const Node& x = *self.inputs[0];
    accumulate(*self.inputs[0],
               Matrix::Constant(x.value.rows(), x.value.cols(), self.grad(0, 0) / n));
  });
}

Tensor sum_all(Tape& tape, const Tensor& a) {
  require_finite(a, "sum_all");
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return tape.record(std::move(out), {a.node()}, [](Node& self) {
    const Node& x = *self.inputs[0];
    accumulate(*self.inputs[0], Matrix::Constant(x.value.rows(), x.value.cols(), self.grad(0, 0)));
  });
}

Tensor gather_rows(Tape& tape, const Tensor& table, std::span<const std::int64_t> indices) {
  require_finite(table, "gather_rows");
  Matrix out(Index(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= table.rows())
      throw Error(ErrorCode::TokenOutOfVocab,
                  "gather_rows: index " + std::to_string(indices[i]) + " outside table of " +
                      std::to_string(table.rows()) + " rows");
    out.row(Index(i)) = table.value().row(indices[i]);
  }
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  return tape.record(std::move(out), {table.node()}, [idx = std::move(idx)](Node& self) {
    Node& t = *self.inputs[0];
    if (!t.requires_grad) return;
    if (t.grad.size() == 0) t.grad.setZero(t.value.rows(), t.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) t.grad.row(idx[i]) += self.grad.row(Index(i));
  });
}

Tensor masked_weight(Tape& tape, const Tensor& w, const Tensor& mask) {
  if (mask.rows() != w.rows() || mask.cols() != w.cols())
    throw Error(ErrorCode::ShapeMismatch,
                "masked_weight: " + shape_str(w.value()) + " vs mask " + shape_str(mask.value()));
  require_finite(w, "masked_weight");
  Matrix out = w.value().cwiseProduct(mask.value());
  // The mask is held as an input so the graph shares it instead of copying it.
  return tape.record(std::move(out), {w.node(), mask.node()}, [](Node& self) {
    accumulate(*self.inputs[0], self.grad.cwiseProduct(self.inputs[1]->value));
  });
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> labels) {
  require_finite(logits, "cross_entropy");
  if (Index(labels.size()) != logits.rows())
    throw Error(ErrorCode::ShapeMismatch, "cross_entropy: " + std::to_string(labels.size()) +
                                              " labels for " + shape_str(logits.value()));
  const Index n = logits.rows();
  Matrix prob(n, logits.cols());
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[std::size_t(i)];
    if (y < 0 || y >= logits.cols())
      throw Error(ErrorCode::InvalidArgument, "cross_entropy: label out of range");
    const double mx = logits.value().row(i).maxCoeff();
    prob.row(i) = (logits.value().row(i).array() - mx).exp().matrix();
    const double z = prob.row(i).sum();
    prob.row(i) /= z;
    loss += -(logits.value()(i, y) - mx - std::log(z));
  }
  Matrix out(1, 1);
  out(0, 0) = loss / double(n);
  std::vector<int> y(labels.begin(), labels.end());
  return tape.record(std::move(out), {logits.node()},
                     [prob = std::move(prob), y = std::move(y)](Node& self) {
                       Matrix g = prob;
                       for (std::size_t i = 0; i < y.size(); ++i) g(Index(i), y[i]) -= 1.0;
                       accumulate(*self.inputs[0], g * (self.grad(0, 0) / double(y.size())));
                     });
}

Tensor dropout(Tape& tape, const Tensor& a, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "dropout: p outside [0,1)");
  if (p == 0.0) return a;
  require_finite(a, "dropout");
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return tape.record(std::move(out), {a.node()}, [mask = std::move(mask)](Node& self) {
    accumulate(*self.inputs[0], self.grad.cwiseProduct(mask));
  });
}

double gradient_check(const GraphBuilder& f, Tensor& param, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "gradient_check: h must be positive");
  const bool was_param = param.requires_grad();
  param.node()->requires_grad = true;
  param.zero_grad();
  {
    Tape tape;
    Tensor loss = f(tape);
    tape.backward(loss);
  }
  const Matrix analytic = param.grad();
  Matrix& x = param.value();
  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    Tape tp;
    const double fp = f(tp).item();
    x.data()[i] = orig - h;
    Tape tm;
    const double fm = f(tm).item();
    x.data()[i] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double a = analytic.data()[i];
    worst = std::max(worst, std::abs(a - fd) / std::max(1.0, std::abs(a)));
  }
  param.node()->requires_grad = was_param;
  return worst;
}

double gradient_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Matrix& x,
                      double h) {
  Tensor leaf = Tensor::parameter(x);
  return gradient_check([&](Tape& tape) { return f(tape, leaf); }, leaf, h);
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state) {
  if (params.size() != grads.size())
    throw Error(ErrorCode::ShapeMismatch, "adam_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols())
      throw Error(ErrorCode::ShapeMismatch,
                  "adam_step: parameter " + std::to_string(i) + " " + shape_str(*params[i]) +
                      " vs gradient " + shape_str(*grads[i]));
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size())
    throw Error(ErrorCode::ShapeMismatch, "adam_step: state tracks a different parameter set");

  const AdamConfig& c = state.config;
  double gscale = 1.0;
  if (c.clip_value > 0.0) {
    double sq = 0.0;
    for (const auto* g : grads) sq += g->squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > c.clip_value) gscale = c.clip_value / norm;
  }

  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, double(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    auto g = (*grads[i]) * gscale;
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g.cwiseAbs2();
    if (c.weight_decay > 0.0) p *= (1.0 - c.lr * c.weight_decay);
    p.array() -= c.lr * (state.m[i].array() / bc1) /
                 ((state.v[i].array() / bc2).sqrt() + c.eps);
  }
}

void adam_step(std::span<const Tensor> params, AdamState& state) {
  std::vector<Matrix*> values;
  std::vector<const Matrix*> grads;
  std::vector<Matrix> zeros;
  zeros.reserve(params.size());
  for (const auto& t : params) {
    values.push_back(&t.node()->value);
    if (t.grad().size() == 0) {
      zeros.push_back(Matrix::Zero(t.rows(), t.cols()));
      grads.push_back(&zeros.back());
    } else {
      grads.push_back(&t.grad());
    }
  }
  adam_step(values, grads, state);
}

}  // namespace topo::ad
