#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "marl/tensor.hpp"

namespace marl::ad {

// A trainable tensor with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value)
      : name(std::move(name)), value(std::move(value)), grad(Tensor::zeros_like(this->value)) {}

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records one forward pass. Node order is creation order, which is already a
// topological order, so backward is a single reverse sweep. A tape is used
// for one backward pass and then discarded.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf whose gradient is added into `p.grad` by backward().
  Var param(Parameter& p);

  // Accumulates d(loss)/d(param) into every Parameter bound on this tape.
  // Throws ContractViolation unless `loss` holds exactly one element.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of an input node, allocated on first use, or nullptr when
  // that node does not lead back to any Parameter.
  Tensor* grad_sink(std::size_t id);

  // Appends an op result. Throws NumericError if `value` is not finite.
  Var push(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

enum class Activation { identity, tanh, relu, sigmoid };

// y = x * w^T  with x [B, in], w [out, in]
Var matmul_nt(Var x, Var w);
// y = x + b broadcast over rows; b has `cols(x)` elements
Var add_row(Var x, Var b);
// y = x * w^T + b
Var linear(Var x, Var w, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var one_minus(Var a);
Var neg(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var activate(Var a, Activation act);

// Row-wise gain * (x - mean) / sqrt(var + eps) + bias, population variance.
Var layer_norm(Var x, Var gain, Var bias, double eps);

// [B, m] ++ [B, n] -> [B, m + n]
Var concat_cols(Var a, Var b);
// y = x * scale + shift per column, with constant column vectors.
Var affine_cols(Var x, std::span<const double> scale, std::span<const double> shift);

Var sum(Var a);
Var mean(Var a);
// mean((pred - target)^2) over every element
Var mse(Var pred, Var target);

// Runs backward from `loss` and returns copies of each parameter's gradient.
std::vector<Tensor> grad(Var loss, std::span<Parameter* const> params);

}  // namespace marl::ad
