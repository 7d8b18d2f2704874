#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "marl/nn.hpp"
#include "marl/replay.hpp"
#include "marl/rng.hpp"

// Independent recurrent DDPG agent: a GRU policy and a GRU critic with a
// layer-normalised hidden layer, delayed target copies of both, and the two
// losses that train them.
namespace marl::agents {

using ad::Tape;
using ad::Var;
using nn::Binding;

struct NetworkShape {
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::size_t gru_hidden = 64;
  std::size_t dense = 64;
  std::vector<double> action_low;
  std::vector<double> action_high;
};

// (GRU state ++ current obs) -> dense(relu) -> linear -> tanh, rescaled to the
// action box.
struct PolicyNet {
  PolicyNet() = default;
  PolicyNet(const NetworkShape& shape, const std::string& prefix, Rng& rng);

  nn::GruCell gru;
  nn::Linear hidden;
  nn::Linear head;
  std::vector<double> action_scale;  // (high - low) / 2
  std::vector<double> action_shift;  // (high + low) / 2

  struct Bound {
    nn::GruCell::Bound gru;
    nn::Linear::Bound hidden, head;
  };
  Bound bind(Tape& tape, Binding mode);
  std::vector<ad::Parameter*> parameters();
  std::size_t hidden_dim() const { return gru.hidden_dim(); }
};

// Head input: GRU state with the current observation appended.
Var head_features(Var hidden, Var obs);

Var policy_action(const PolicyNet& net, const PolicyNet::Bound& w, Var features);

// (GRU state ++ current obs) -> dense -> layer norm -> tanh, then ++ action
// -> dense -> relu -> scalar.
struct CriticNet {
  CriticNet() = default;
  CriticNet(const NetworkShape& shape, const std::string& prefix, Rng& rng);

  nn::GruCell gru;
  nn::Linear hidden;
  nn::LayerNorm norm;
  nn::Linear hidden2;
  nn::Linear head;

  struct Bound {
    nn::GruCell::Bound gru;
    nn::Linear::Bound hidden;
    nn::LayerNorm::Bound norm;
    nn::Linear::Bound hidden2;
    nn::Linear::Bound head;
  };
  Bound bind(Tape& tape, Binding mode);
  std::vector<ad::Parameter*> parameters();
  std::size_t hidden_dim() const { return gru.hidden_dim(); }
};

// [B, 1] Q-values for head features and `action`.
Var critic_value(const CriticNet::Bound& w, Var features, Var action);

struct Learning {
  double policy_lr = 1e-3;
  double critic_lr = 1e-3;
};

// Online and target networks of one agent plus their optimizers. Pinned in
// memory: the optimizers refer to the parameters by address.
class AgentNets {
 public:
  AgentNets(const NetworkShape& shape, std::uint64_t seed, Learning lr = {});
  AgentNets(const AgentNets&) = delete;
  AgentNets& operator=(const AgentNets&) = delete;

  const NetworkShape& shape() const { return shape_; }

  PolicyNet policy;
  PolicyNet target_policy;
  CriticNet critic;
  CriticNet target_critic;
  nn::Adam policy_optimizer;
  nn::Adam critic_optimizer;

 private:
  NetworkShape shape_;
};

struct HiddenState {
  std::vector<double> policy_hidden;
  std::vector<double> critic_hidden;

  static HiddenState zeros(const AgentNets& agent);
};

// Advances both recurrent states by one observation and returns
// clip(policy(history) + N(0, noise_scale^2), low, high).
std::vector<double> select_action(AgentNets& agent, std::span<const double> obs, HiddenState& hidden,
                                  double noise_scale, Rng& rng);

// Time-major view of a batch of equal-length windows.
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t window = 0;
  std::vector<Tensor> observations;  // window + 1 tensors of [batch, obs_dim]
  std::vector<Tensor> actions;       // window tensors of [batch, act_dim]
  std::vector<double> rewards;       // [batch * window], row per sequence
  std::vector<std::uint8_t> dones;   // [batch * window]
};

SequenceBatch make_sequence_batch(std::span<const replay::EpisodeSequence> sequences);

// Peng-style Q(lambda) targets for one sequence, computed backward:
//   G_t = r_t + gamma * (1 - done_t) * [(1 - lambda) * v_{t+1} + lambda * G_{t+1}]
// with G_L = v_L at the end of the window. bootstrap[t] holds v_{t+1}, the
// target critic's value of the target policy's action after step t.
std::vector<double> lambda_returns(std::span<const double> rewards, std::span<const std::uint8_t> dones,
                                   std::span<const double> bootstrap, double gamma, double lambda);

// Target-network bootstrap values v_{t+1}, [batch * window] row-major.
std::vector<double> bootstrap_values(AgentNets& agent, const SequenceBatch& batch);

// Detached per-step targets, one [batch, 1] tensor per time step.
std::vector<Tensor> critic_targets(AgentNets& agent, const SequenceBatch& batch, double gamma, double lambda);

// Mean over batch and time of (Q(history_t, a_t) - target_t)^2; critic trainable.
Var critic_loss(Tape& tape, AgentNets& agent, const SequenceBatch& batch, const std::vector<Tensor>& targets);

// Q evaluated at step t for a [B, act_dim] action.
using QFunction = std::function<Var(std::size_t t, Var action)>;

// Mean over batch and time of -Q(history_t, mu(history_t)); only the policy is
// trainable, the critic enters as constants.
Var policy_loss(Tape& tape, AgentNets& agent, const SequenceBatch& batch);
Var policy_loss(Tape& tape, PolicyNet& policy, const SequenceBatch& batch, const QFunction& q);

// target <- tau * online + (1 - tau) * target for both networks.
void soft_update(AgentNets& agent, double tau);

struct UpdateConfig {
  double gamma = 0.99;
  double lambda = 0.8;
  double tau = 0.005;
};

struct UpdateStats {
  double critic_loss = 0.0;
  double policy_loss = 0.0;
};

// One critic step, one policy step, then the target update.
UpdateStats ddpg_update(AgentNets& agent, const SequenceBatch& batch, const UpdateConfig& cfg);

// Flat list of named float arrays covering online and target networks.
nlohmann::json export_weights(AgentNets& agent);
void import_weights(AgentNets& agent, const nlohmann::json& weights);

}  // namespace marl::agents
