#include "marl/autodiff.hpp"

#include <cmath>

#include "marl/errors.hpp"
#include "marl/kernels.hpp"

namespace marl::ad {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  require(!consumed_, "tape already used for a backward pass");
  if (!value.all_finite()) throw NumericError("non-finite value in constant");
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  require(!consumed_, "tape already used for a backward pass");
  require(p.grad.same_shape(p.value), "parameter gradient shape differs from value shape");
  if (!p.value.all_finite()) throw NumericError("non-finite value in parameter " + p.name);
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  require(!consumed_, "tape already used for a backward pass");
  if (!value.all_finite()) throw NumericError(std::string("non-finite value in ") + op);
  bool needs = false;
  for (const Var& in : inputs) {
    require(&in.tape() == this, "operands recorded on different tapes");
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_sink(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return nullptr;
  if (node.grad.empty()) node.grad = Tensor::zeros_like(node.value);
  return &node.grad;
}

void Tape::backward(Var loss) {
  require(!consumed_, "tape already used for a backward pass");
  require(&loss.tape() == this, "loss recorded on a different tape");
  if (loss.value().size() != 1)
    throw ContractViolation("backward requires a scalar loss, got shape " + loss.value().shape_string());
  consumed_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_sink(loss.id())->fill(1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (node.grad.empty()) continue;
    if (node.backward) node.backward(*this, id);
    if (node.param != nullptr) {
      auto dst = node.param->grad.data();
      auto src = node.grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
}

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw ContractViolation(std::string(op) + ": shape mismatch " + a.value().shape_string() + " vs " +
                            b.value().shape_string());
}

// Output shape for ops that map each element independently.
template <typename F>
Tensor map_values(const Tensor& x, F f) {
  Tensor y = Tensor::zeros_like(x);
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
  return y;
}

}  // namespace

Var matmul_nt(Var x, Var w) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const std::size_t batch = xv.rows(), in = xv.cols(), out = wv.rows();
  if (wv.shape().size() != 2 || wv.cols() != in)
    throw ContractViolation("matmul_nt: weight " + wv.shape_string() + " incompatible with input " + xv.shape_string());
  Tensor y({batch, out});
  kernels::gemm_nt(xv.data(), wv.data(), y.data(), batch, out, in);
  const auto xid = x.id(), wid = w.id();
  return x.tape().push("matmul", std::move(y), {x, w}, [xid, wid, batch, in, out](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    if (Tensor* dx = t.grad_sink(xid)) kernels::gemm_nn(dy.data(), t.value(wid).data(), dx->data(), batch, in, out);
    if (Tensor* dw = t.grad_sink(wid)) kernels::gemm_tn(dy.data(), t.value(xid).data(), dw->data(), out, in, batch);
  });
}

Var add_row(Var x, Var b) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  require(b.value().size() == cols, "add_row: bias length does not match columns");
  Tensor y = xv;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y.at(r, c) += b.value()[c];
  const auto xid = x.id(), bid = b.id();
  return x.tape().push("add_row", std::move(y), {x, b}, [xid, bid, rows, cols](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    if (Tensor* dx = t.grad_sink(xid))
      for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i];
    if (Tensor* db = t.grad_sink(bid))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*db)[c] += dy.at(r, c);
  });
}

Var linear(Var x, Var w, Var b) { return add_row(matmul_nt(x, w), b); }

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  const auto aid = a.id(), bid = b.id();
  return a.tape().push("add", std::move(y), {a, b}, [aid, bid](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    if (Tensor* da = t.grad_sink(aid))
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i];
    if (Tensor* db = t.grad_sink(bid))
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] += dy[i];
  });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  const auto aid = a.id(), bid = b.id();
  return a.tape().push("sub", std::move(y), {a, b}, [aid, bid](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    if (Tensor* da = t.grad_sink(aid))
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i];
    if (Tensor* db = t.grad_sink(bid))
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] -= dy[i];
  });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  const auto aid = a.id(), bid = b.id();
  return a.tape().push("mul", std::move(y), {a, b}, [aid, bid](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    if (Tensor* da = t.grad_sink(aid))
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * t.value(bid)[i];
    if (Tensor* db = t.grad_sink(bid))
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] += dy[i] * t.value(aid)[i];
  });
}

Var scale(Var a, double s) {
  const auto aid = a.id();
  return a.tape().push("scale", map_values(a.value(), [s](double v) { return v * s; }), {a},
                       [aid, s](Tape& t, std::size_t self) {
                         const Tensor& dy = t.grad(self);
                         if (Tensor* da = t.grad_sink(aid))
                           for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * s;
                       });
}

Var neg(Var a) { return scale(a, -1.0); }

Var one_minus(Var a) {
  const auto aid = a.id();
  return a.tape().push("one_minus", map_values(a.value(), [](double v) { return 1.0 - v; }), {a},
                       [aid](Tape& t, std::size_t self) {
                         const Tensor& dy = t.grad(self);
                         if (Tensor* da = t.grad_sink(aid))
                           for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] -= dy[i];
                       });
}

Var sigmoid(Var a) {
  const auto aid = a.id();
  Tensor y = map_values(a.value(), [](double v) {
    // Split by sign so exp never overflows.
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
  return a.tape().push("sigmoid", std::move(y), {a}, [aid](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    const Tensor& y = t.value(self);
    if (Tensor* da = t.grad_sink(aid))
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var a) {
  const auto aid = a.id();
  return a.tape().push("tanh", map_values(a.value(), [](double v) { return std::tanh(v); }), {a},
                       [aid](Tape& t, std::size_t self) {
                         const Tensor& dy = t.grad(self);
                         const Tensor& y = t.value(self);
                         if (Tensor* da = t.grad_sink(aid))
                           for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * (1.0 - y[i] * y[i]);
                       });
}

Var relu(Var a) {
  const auto aid = a.id();
  return a.tape().push("relu", map_values(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {a},
                       [aid](Tape& t, std::size_t self) {
                         const Tensor& dy = t.grad(self);
                         const Tensor& x = t.value(aid);
                         if (Tensor* da = t.grad_sink(aid))
                           for (std::size_t i = 0; i < dy.size(); ++i)
                             if (x[i] > 0.0) (*da)[i] += dy[i];
                       });
}

Var activate(Var a, Activation act) {
  switch (act) {
    case Activation::identity: return a;
    case Activation::tanh: return tanh(a);
    case Activation::relu: return relu(a);
    case Activation::sigmoid: return sigmoid(a);
  }
  return a;
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require(eps > 0.0, "layer_norm: eps must be positive");
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  require(gain.value().size() == cols && bias.value().size() == cols, "layer_norm: gain/bias length mismatch");

  Tensor normalized = Tensor::zeros_like(xv);
  std::vector<double> inv_std(rows);
  Tensor y = Tensor::zeros_like(xv);
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += xv.at(r, c);
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xv.at(r, c) - mu) * (xv.at(r, c) - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      normalized.at(r, c) = (xv.at(r, c) - mu) * inv_std[r];
      y.at(r, c) = gain.value()[c] * normalized.at(r, c) + bias.value()[c];
    }
  }
  const auto xid = x.id(), gid = gain.id(), bid = bias.id();
  return x.tape().push(
      "layer_norm", std::move(y), {x, gain, bias},
      [xid, gid, bid, rows, cols, normalized = std::move(normalized), inv_std = std::move(inv_std)](
          Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        const Tensor& g = t.value(gid);
        if (Tensor* dg = t.grad_sink(gid))
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) (*dg)[c] += dy.at(r, c) * normalized.at(r, c);
        if (Tensor* db = t.grad_sink(bid))
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) (*db)[c] += dy.at(r, c);
        if (Tensor* dx = t.grad_sink(xid)) {
          const double n = static_cast<double>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_d = 0.0, mean_dn = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = dy.at(r, c) * g[c];
              mean_d += d;
              mean_dn += d * normalized.at(r, c);
            }
            mean_d /= n;
            mean_dn /= n;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = dy.at(r, c) * g[c];
              dx->at(r, c) += inv_std[r] * (d - mean_d - normalized.at(r, c) * mean_dn);
            }
          }
        }
      });
}

Var concat_cols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols();
  require(bv.rows() == rows, "concat_cols: row count mismatch");
  Tensor y({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ca; ++c) y.at(r, c) = av.at(r, c);
    for (std::size_t c = 0; c < cb; ++c) y.at(r, ca + c) = bv.at(r, c);
  }
  const auto aid = a.id(), bid = b.id();
  return a.tape().push("concat_cols", std::move(y), {a, b}, [aid, bid, rows, ca, cb](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    if (Tensor* da = t.grad_sink(aid))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ca; ++c) (*da)[r * ca + c] += dy.at(r, c);
    if (Tensor* db = t.grad_sink(bid))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cb; ++c) (*db)[r * cb + c] += dy.at(r, ca + c);
  });
}

Var affine_cols(Var x, std::span<const double> scale_by, std::span<const double> shift) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  require(scale_by.size() == cols && shift.size() == cols, "affine_cols: vector length mismatch");
  Tensor y = Tensor::zeros_like(xv);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y.at(r, c) = xv.at(r, c) * scale_by[c] + shift[c];
  std::vector<double> s(scale_by.begin(), scale_by.end());
  const auto xid = x.id();
  return x.tape().push("affine_cols", std::move(y), {x}, [xid, rows, cols, s = std::move(s)](Tape& t, std::size_t self) {
    const Tensor& dy = t.grad(self);
    if (Tensor* dx = t.grad_sink(xid))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*dx)[r * cols + c] += dy.at(r, c) * s[c];
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const auto aid = a.id();
  return a.tape().push("sum", Tensor::scalar(total), {a}, [aid](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    if (Tensor* da = t.grad_sink(aid))
      for (double& v : da->data()) v += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mse(Var pred, Var target) {
  check_same_shape(pred, target, "mse");
  const Tensor& p = pred.value();
  const Tensor& q = target.value();
  const double n = static_cast<double>(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total += (p[i] - q[i]) * (p[i] - q[i]);
  const auto pid = pred.id(), qid = target.id();
  return pred.tape().push("mse", Tensor::scalar(total / n), {pred, target}, [pid, qid, n](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0] * 2.0 / n;
    const Tensor& p = t.value(pid);
    const Tensor& q = t.value(qid);
    if (Tensor* dp = t.grad_sink(pid))
      for (std::size_t i = 0; i < p.size(); ++i) (*dp)[i] += g * (p[i] - q[i]);
    if (Tensor* dq = t.grad_sink(qid))
      for (std::size_t i = 0; i < p.size(); ++i) (*dq)[i] -= g * (p[i] - q[i]);
  });
}

std::vector<Tensor> grad(Var loss, std::span<Parameter* const> params) {
  loss.tape().backward(loss);
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Parameter* p : params) out.push_back(p->grad);
  return out;
}

}  // namespace marl::ad
