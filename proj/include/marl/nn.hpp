#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "marl/autodiff.hpp"
#include "marl/rng.hpp"

namespace marl::nn {

using ad::Activation;
using ad::Parameter;
using ad::Tape;
using ad::Var;

// How a network's parameters enter a tape: as trainable leaves or as constants.
enum class Binding { trainable, frozen };

Var bind(Tape& tape, Parameter& p, Binding mode);

struct Linear {
  Linear() = default;
  // Weights and bias ~ U(-1/sqrt(in), 1/sqrt(in)).
  Linear(std::size_t in, std::size_t out, const std::string& name, Rng& rng);

  Parameter weight;  // [out, in]
  Parameter bias;    // [out]

  std::size_t in_dim() const { return weight.value.cols(); }
  std::size_t out_dim() const { return weight.value.rows(); }

  struct Bound {
    Var weight, bias;
  };
  Bound bind(Tape& tape, Binding mode);
  void collect(std::vector<Parameter*>& out);
};

struct LayerNorm {
  LayerNorm() = default;
  LayerNorm(std::size_t dim, const std::string& name);

  Parameter gain;  // ones
  Parameter bias;  // zeros

  struct Bound {
    Var gain, bias;
  };
  Bound bind(Tape& tape, Binding mode);
  void collect(std::vector<Parameter*>& out);
};

inline constexpr double kLayerNormEps = 1e-5;

// Gated recurrent unit with separate input (w_*), recurrent (u_*) and bias
// (b_*) parameters for the update (z), reset (r) and candidate (h) paths.
struct GruCell {
  GruCell() = default;
  // All entries ~ U(-1/sqrt(hidden), 1/sqrt(hidden)).
  GruCell(std::size_t input, std::size_t hidden, const std::string& name, Rng& rng);

  Parameter w_z, w_r, w_h;  // [hidden, input]
  Parameter u_z, u_r, u_h;  // [hidden, hidden]
  Parameter b_z, b_r, b_h;  // [hidden]

  std::size_t input_dim() const { return w_z.value.cols(); }
  std::size_t hidden_dim() const { return w_z.value.rows(); }

  struct Bound {
    Var w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h;
  };
  Bound bind(Tape& tape, Binding mode);
  void collect(std::vector<Parameter*>& out);
};

// One GRU update:
//   z = sigmoid(W_z x + U_z h + b_z), r = sigmoid(W_r x + U_r h + b_r)
//   c = tanh(W_h x + U_h (r * h) + b_h), h' = (1 - z) * h + z * c
// x is [B, input], h is [B, hidden].
Var gru_step(Var x, Var h, const GruCell::Bound& w);

struct DenseLayer {
  Linear::Bound linear;
  Activation activation = Activation::identity;
};

// Chains affine maps and activations.
Var mlp_forward(Var x, std::span<const DenseLayer> layers);

// Element-wise target <- tau * online + (1 - tau) * target.
void soft_update(std::span<Parameter* const> online, std::span<Parameter* const> target, double tau);

struct AdamState {
  AdamState() = default;
  explicit AdamState(const Tensor& like, double learning_rate);

  Tensor first_moment;
  Tensor second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;
};

// Bias-corrected Adam step on `param` using its current gradient.
void adam_update(Parameter& param, AdamState& state);

// Adam over a fixed parameter list.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, double learning_rate);

  void zero_grad();
  void step();
  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<AdamState> states_;
};

}  // namespace marl::nn
