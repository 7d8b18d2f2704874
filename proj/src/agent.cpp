#include "marl/agent.hpp"

#include <algorithm>
#include <cmath>

#include "marl/errors.hpp"

namespace marl::agents {

namespace {

void rename_prefix(std::vector<ad::Parameter*> params, const std::string& from, const std::string& to) {
  for (ad::Parameter* p : params)
    if (p->name.rfind(from, 0) == 0) p->name = to + p->name.substr(from.size());
}

Tensor zeros_rows(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

std::vector<ad::Parameter*> concat(std::vector<ad::Parameter*> a, const std::vector<ad::Parameter*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

PolicyNet::PolicyNet(const NetworkShape& shape, const std::string& prefix, Rng& rng)
    : gru(shape.obs_dim, shape.gru_hidden, prefix + ".gru", rng),
      hidden(shape.gru_hidden + shape.obs_dim, shape.dense, prefix + ".hidden", rng),
      head(shape.dense, shape.act_dim, prefix + ".head", rng) {
  require(shape.action_low.size() == shape.act_dim && shape.action_high.size() == shape.act_dim,
          "policy: action bounds must match act_dim");
  for (std::size_t d = 0; d < shape.act_dim; ++d) {
    action_scale.push_back(0.5 * (shape.action_high[d] - shape.action_low[d]));
    action_shift.push_back(0.5 * (shape.action_high[d] + shape.action_low[d]));
  }
}

PolicyNet::Bound PolicyNet::bind(Tape& tape, Binding mode) {
  return {gru.bind(tape, mode), hidden.bind(tape, mode), head.bind(tape, mode)};
}

std::vector<ad::Parameter*> PolicyNet::parameters() {
  std::vector<ad::Parameter*> out;
  gru.collect(out);
  hidden.collect(out);
  head.collect(out);
  return out;
}

Var head_features(Var hidden, Var obs) { return ad::concat_cols(hidden, obs); }

Var policy_action(const PolicyNet& net, const PolicyNet::Bound& w, Var features) {
  const nn::DenseLayer layers[] = {{w.hidden, nn::Activation::relu}, {w.head, nn::Activation::tanh}};
  return ad::affine_cols(nn::mlp_forward(features, layers), net.action_scale, net.action_shift);
}

CriticNet::CriticNet(const NetworkShape& shape, const std::string& prefix, Rng& rng)
    : gru(shape.obs_dim, shape.gru_hidden, prefix + ".gru", rng),
      hidden(shape.gru_hidden + shape.obs_dim, shape.dense, prefix + ".hidden", rng),
      norm(shape.dense, prefix + ".norm"),
      hidden2(shape.dense + shape.act_dim, shape.dense, prefix + ".hidden2", rng),
      head(shape.dense, 1, prefix + ".head", rng) {}

CriticNet::Bound CriticNet::bind(Tape& tape, Binding mode) {
  return {gru.bind(tape, mode), hidden.bind(tape, mode), norm.bind(tape, mode), hidden2.bind(tape, mode),
          head.bind(tape, mode)};
}

std::vector<ad::Parameter*> CriticNet::parameters() {
  std::vector<ad::Parameter*> out;
  gru.collect(out);
  hidden.collect(out);
  norm.collect(out);
  hidden2.collect(out);
  head.collect(out);
  return out;
}

Var critic_value(const CriticNet::Bound& w, Var features, Var action) {
  Var x = ad::linear(features, w.hidden.weight, w.hidden.bias);
  x = ad::tanh(ad::layer_norm(x, w.norm.gain, w.norm.bias, nn::kLayerNormEps));
  x = ad::relu(ad::linear(ad::concat_cols(x, action), w.hidden2.weight, w.hidden2.bias));
  return ad::linear(x, w.head.weight, w.head.bias);
}

AgentNets::AgentNets(const NetworkShape& shape, std::uint64_t seed, Learning lr) : shape_(shape) {
  Rng rng(seed);
  policy = PolicyNet(shape, "policy", rng);
  critic = CriticNet(shape, "critic", rng);
  target_policy = policy;
  target_critic = critic;
  rename_prefix(target_policy.parameters(), "policy", "target_policy");
  rename_prefix(target_critic.parameters(), "critic", "target_critic");
  policy_optimizer = nn::Adam(policy.parameters(), lr.policy_lr);
  critic_optimizer = nn::Adam(critic.parameters(), lr.critic_lr);
}

HiddenState HiddenState::zeros(const AgentNets& agent) {
  return {std::vector<double>(agent.policy.hidden_dim(), 0.0), std::vector<double>(agent.critic.hidden_dim(), 0.0)};
}

std::vector<double> select_action(AgentNets& agent, std::span<const double> obs, HiddenState& hidden,
                                  double noise_scale, Rng& rng) {
  require(obs.size() == agent.shape().obs_dim, "select_action: observation length does not match");
  require(noise_scale >= 0.0, "select_action: noise scale must be non-negative");
  Tape tape;
  const Var x = tape.constant(Tensor::matrix(1, obs.size(), std::vector<double>(obs.begin(), obs.end())));
  const auto pw = agent.policy.bind(tape, Binding::frozen);
  const auto cw = agent.critic.gru.bind(tape, Binding::frozen);
  const Var hp = nn::gru_step(x, tape.constant(Tensor::matrix(1, hidden.policy_hidden.size(), hidden.policy_hidden)), pw.gru);
  const Var hc = nn::gru_step(x, tape.constant(Tensor::matrix(1, hidden.critic_hidden.size(), hidden.critic_hidden)), cw);
  const Var mu = policy_action(agent.policy, pw, head_features(hp, x));

  hidden.policy_hidden.assign(hp.value().data().begin(), hp.value().data().end());
  hidden.critic_hidden.assign(hc.value().data().begin(), hc.value().data().end());
  std::vector<double> action(mu.value().data().begin(), mu.value().data().end());
  const NetworkShape& s = agent.shape();
  for (std::size_t d = 0; d < action.size(); ++d) {
    if (noise_scale > 0.0) action[d] += noise_scale * rng.normal();
    action[d] = std::clamp(action[d], s.action_low[d], s.action_high[d]);
  }
  return action;
}

SequenceBatch make_sequence_batch(std::span<const replay::EpisodeSequence> sequences) {
  require(!sequences.empty(), "empty sequence batch");
  const std::size_t B = sequences.size();
  const std::size_t W = sequences.front().length();
  const std::size_t od = sequences.front().obs_dim, adim = sequences.front().act_dim;
  SequenceBatch batch;
  batch.batch = B;
  batch.window = W;
  batch.observations.assign(W + 1, zeros_rows(B, od));
  batch.actions.assign(W, zeros_rows(B, adim));
  batch.rewards.resize(B * W);
  batch.dones.resize(B * W);
  for (std::size_t b = 0; b < B; ++b) {
    const replay::EpisodeSequence& s = sequences[b];
    require(s.length() == W && s.obs_dim == od && s.act_dim == adim, "sequence batch entries must share a shape");
    for (std::size_t t = 0; t <= W; ++t) {
      auto o = s.observation(t);
      for (std::size_t k = 0; k < od; ++k) batch.observations[t].at(b, k) = o[k];
    }
    for (std::size_t t = 0; t < W; ++t) {
      auto a = s.action(t);
      for (std::size_t k = 0; k < adim; ++k) batch.actions[t].at(b, k) = a[k];
      batch.rewards[b * W + t] = s.rewards[t];
      batch.dones[b * W + t] = s.dones[t];
    }
  }
  return batch;
}

std::vector<double> lambda_returns(std::span<const double> rewards, std::span<const std::uint8_t> dones,
                                   std::span<const double> bootstrap, double gamma, double lambda) {
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
  const std::size_t L = rewards.size();
  require(dones.size() == L && bootstrap.size() == L, "rewards, dones and bootstrap values must align");
  std::vector<double> G(L);
  double next = L > 0 ? bootstrap[L - 1] : 0.0;  // G_L = v_L
  for (std::size_t t = L; t-- > 0;) {
    if (dones[t]) {
      G[t] = rewards[t];
    } else {
      G[t] = rewards[t] + gamma * ((1.0 - lambda) * bootstrap[t] + lambda * next);
    }
    next = G[t];
  }
  return G;
}

std::vector<double> bootstrap_values(AgentNets& agent, const SequenceBatch& batch) {
  const std::size_t B = batch.batch, W = batch.window;
  Tape tape;
  const auto pw = agent.target_policy.bind(tape, Binding::frozen);
  const auto cw = agent.target_critic.bind(tape, Binding::frozen);
  Var hp = tape.constant(zeros_rows(B, agent.target_policy.hidden_dim()));
  Var hc = tape.constant(zeros_rows(B, agent.target_critic.hidden_dim()));
  std::vector<double> values(B * W);
  for (std::size_t t = 0; t <= W; ++t) {
    const Var o = tape.constant(batch.observations[t]);
    hp = nn::gru_step(o, hp, pw.gru);
    hc = nn::gru_step(o, hc, cw.gru);
    if (t == 0) continue;
    const Var q = critic_value(cw, head_features(hc, o), policy_action(agent.target_policy, pw, head_features(hp, o)));
    for (std::size_t b = 0; b < B; ++b) values[b * W + (t - 1)] = q.value()[b];
  }
  return values;
}

std::vector<Tensor> critic_targets(AgentNets& agent, const SequenceBatch& batch, double gamma, double lambda) {
  const std::size_t B = batch.batch, W = batch.window;
  const std::vector<double> boot = bootstrap_values(agent, batch);
  std::vector<Tensor> targets(W, zeros_rows(B, 1));
  for (std::size_t b = 0; b < B; ++b) {
    const auto G = lambda_returns(std::span(batch.rewards).subspan(b * W, W), std::span(batch.dones).subspan(b * W, W),
                                  std::span(boot).subspan(b * W, W), gamma, lambda);
    for (std::size_t t = 0; t < W; ++t) targets[t][b] = G[t];
  }
  return targets;
}

Var critic_loss(Tape& tape, AgentNets& agent, const SequenceBatch& batch, const std::vector<Tensor>& targets) {
  require(targets.size() == batch.window, "critic_loss: one target tensor per time step required");
  const auto cw = agent.critic.bind(tape, Binding::trainable);
  Var h = tape.constant(zeros_rows(batch.batch, agent.critic.hidden_dim()));
  Var total;
  for (std::size_t t = 0; t < batch.window; ++t) {
    const Var o = tape.constant(batch.observations[t]);
    h = nn::gru_step(o, h, cw.gru);
    const Var q = critic_value(cw, head_features(h, o), tape.constant(batch.actions[t]));
    const Var err = ad::mse(q, tape.constant(targets[t]));
    total = t == 0 ? err : ad::add(total, err);
  }
  return ad::scale(total, 1.0 / static_cast<double>(batch.window));
}

Var policy_loss(Tape& tape, PolicyNet& policy, const SequenceBatch& batch, const QFunction& q) {
  const auto pw = policy.bind(tape, Binding::trainable);
  Var h = tape.constant(zeros_rows(batch.batch, policy.hidden_dim()));
  Var total;
  for (std::size_t t = 0; t < batch.window; ++t) {
    const Var o = tape.constant(batch.observations[t]);
    h = nn::gru_step(o, h, pw.gru);
    const Var value = ad::mean(q(t, policy_action(policy, pw, head_features(h, o))));
    total = t == 0 ? value : ad::add(total, value);
  }
  return ad::scale(total, -1.0 / static_cast<double>(batch.window));
}

Var policy_loss(Tape& tape, AgentNets& agent, const SequenceBatch& batch) {
  const auto cw = agent.critic.bind(tape, Binding::frozen);
  std::vector<Var> critic_states;
  Var h = tape.constant(zeros_rows(batch.batch, agent.critic.hidden_dim()));
  for (std::size_t t = 0; t < batch.window; ++t) {
    const Var o = tape.constant(batch.observations[t]);
    h = nn::gru_step(o, h, cw.gru);
    critic_states.push_back(head_features(h, o));
  }
  return policy_loss(tape, agent.policy, batch,
                     [&](std::size_t t, Var action) { return critic_value(cw, critic_states[t], action); });
}

void soft_update(AgentNets& agent, double tau) {
  nn::soft_update(agent.policy.parameters(), agent.target_policy.parameters(), tau);
  nn::soft_update(agent.critic.parameters(), agent.target_critic.parameters(), tau);
}

UpdateStats ddpg_update(AgentNets& agent, const SequenceBatch& batch, const UpdateConfig& cfg) {
  UpdateStats stats;
  const std::vector<Tensor> targets = critic_targets(agent, batch, cfg.gamma, cfg.lambda);
  agent.critic_optimizer.zero_grad();
  {
    Tape tape;
    const Var loss = critic_loss(tape, agent, batch, targets);
    stats.critic_loss = loss.value().item();
    tape.backward(loss);
  }
  agent.critic_optimizer.step();

  agent.policy_optimizer.zero_grad();
  {
    Tape tape;
    const Var loss = policy_loss(tape, agent, batch);
    stats.policy_loss = loss.value().item();
    tape.backward(loss);
  }
  agent.policy_optimizer.step();
  soft_update(agent, cfg.tau);
  return stats;
}

namespace {

std::vector<ad::Parameter*> all_parameters(AgentNets& agent) {
  return concat(concat(concat(agent.policy.parameters(), agent.critic.parameters()), agent.target_policy.parameters()),
                agent.target_critic.parameters());
}

}  // namespace

nlohmann::json export_weights(AgentNets& agent) {
  nlohmann::json arrays = nlohmann::json::array();
  for (const ad::Parameter* p : all_parameters(agent)) {
    std::vector<float> data(p->value.data().begin(), p->value.data().end());
    arrays.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"data", data}});
  }
  return arrays;
}

void import_weights(AgentNets& agent, const nlohmann::json& weights) {
  auto params = all_parameters(agent);
  require(weights.is_array() && weights.size() == params.size(), "checkpoint parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& entry = weights[k];
    require(entry.at("name").get<std::string>() == params[k]->name, "checkpoint parameter name mismatch");
    const auto data = entry.at("data").get<std::vector<double>>();
    require(data.size() == params[k]->value.size(), "checkpoint parameter size mismatch");
    std::copy(data.begin(), data.end(), params[k]->value.data().begin());
  }
}

}  // namespace marl::agents
