#include "marl/nn.hpp"

#include <cmath>

#include "marl/errors.hpp"

namespace marl::nn {

namespace {

Tensor uniform_tensor(std::vector<std::size_t> shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

Var bind(Tape& tape, Parameter& p, Binding mode) {
  return mode == Binding::trainable ? tape.param(p) : tape.constant(p.value);
}

Linear::Linear(std::size_t in, std::size_t out, const std::string& name, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = Parameter(name + ".weight", uniform_tensor({out, in}, bound, rng));
  bias = Parameter(name + ".bias", uniform_tensor({out}, bound, rng));
}

Linear::Bound Linear::bind(Tape& tape, Binding mode) {
  return {nn::bind(tape, weight, mode), nn::bind(tape, bias, mode)};
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

LayerNorm::LayerNorm(std::size_t dim, const std::string& name)
    : gain(name + ".gain", Tensor({dim}, 1.0)), bias(name + ".bias", Tensor({dim}, 0.0)) {}

LayerNorm::Bound LayerNorm::bind(Tape& tape, Binding mode) {
  return {nn::bind(tape, gain, mode), nn::bind(tape, bias, mode)};
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gain);
  out.push_back(&bias);
}

GruCell::GruCell(std::size_t input, std::size_t hidden, const std::string& name, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_z = Parameter(name + ".w_z", uniform_tensor({hidden, input}, bound, rng));
  w_r = Parameter(name + ".w_r", uniform_tensor({hidden, input}, bound, rng));
  w_h = Parameter(name + ".w_h", uniform_tensor({hidden, input}, bound, rng));
  u_z = Parameter(name + ".u_z", uniform_tensor({hidden, hidden}, bound, rng));
  u_r = Parameter(name + ".u_r", uniform_tensor({hidden, hidden}, bound, rng));
  u_h = Parameter(name + ".u_h", uniform_tensor({hidden, hidden}, bound, rng));
  b_z = Parameter(name + ".b_z", uniform_tensor({hidden}, bound, rng));
  b_r = Parameter(name + ".b_r", uniform_tensor({hidden}, bound, rng));
  b_h = Parameter(name + ".b_h", uniform_tensor({hidden}, bound, rng));
}

GruCell::Bound GruCell::bind(Tape& tape, Binding mode) {
  return {nn::bind(tape, w_z, mode), nn::bind(tape, w_r, mode), nn::bind(tape, w_h, mode),
          nn::bind(tape, u_z, mode), nn::bind(tape, u_r, mode), nn::bind(tape, u_h, mode),
          nn::bind(tape, b_z, mode), nn::bind(tape, b_r, mode), nn::bind(tape, b_h, mode)};
}

void GruCell::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&w_z, &w_r, &w_h, &u_z, &u_r, &u_h, &b_z, &b_r, &b_h}) out.push_back(p);
}

Var gru_step(Var x, Var h, const GruCell::Bound& w) {
  require(x.value().cols() == w.w_z.value().cols(), "gru_step: input width does not match weights");
  require(h.value().cols() == w.u_z.value().cols() && h.value().rows() == x.value().rows(),
          "gru_step: hidden state shape does not match weights");
  Var z = ad::sigmoid(ad::add(ad::linear(x, w.w_z, w.b_z), ad::matmul_nt(h, w.u_z)));
  Var r = ad::sigmoid(ad::add(ad::linear(x, w.w_r, w.b_r), ad::matmul_nt(h, w.u_r)));
  Var c = ad::tanh(ad::add(ad::linear(x, w.w_h, w.b_h), ad::matmul_nt(ad::mul(r, h), w.u_h)));
  return ad::add(ad::mul(ad::one_minus(z), h), ad::mul(z, c));
}

Var mlp_forward(Var x, std::span<const DenseLayer> layers) {
  for (const DenseLayer& layer : layers) x = ad::activate(ad::linear(x, layer.linear.weight, layer.linear.bias), layer.activation);
  return x;
}

void soft_update(std::span<Parameter* const> online, std::span<Parameter* const> target, double tau) {
  require(tau >= 0.0 && tau <= 1.0, "soft_update: tau must lie in [0, 1]");
  require(online.size() == target.size(), "soft_update: parameter count mismatch");
  for (std::size_t k = 0; k < online.size(); ++k) {
    auto src = online[k]->value.data();
    auto dst = target[k]->value.data();
    if (!online[k]->value.same_shape(target[k]->value))
      throw ContractViolation("soft_update: shape mismatch for " + online[k]->name);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = tau * src[i] + (1.0 - tau) * dst[i];
  }
}

AdamState::AdamState(const Tensor& like, double lr)
    : first_moment(Tensor::zeros_like(like)), second_moment(Tensor::zeros_like(like)), learning_rate(lr) {}

void adam_update(Parameter& param, AdamState& state) {
  require(state.first_moment.same_shape(param.value) && state.second_moment.same_shape(param.value) &&
              param.grad.same_shape(param.value),
          "adam_update: state shape does not match parameter " + param.name);
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  auto value = param.value.data();
  auto grad = param.grad.data();
  auto m = state.first_moment.data();
  auto v = state.second_moment.data();
  for (std::size_t i = 0; i < value.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    value[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

Adam::Adam(std::vector<Parameter*> params, double learning_rate) : params_(std::move(params)) {
  states_.reserve(params_.size());
  for (const Parameter* p : params_) states_.emplace_back(p->value, learning_rate);
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) adam_update(*params_[i], states_[i]);
}

}  // namespace marl::nn
