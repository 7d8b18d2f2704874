#include "marl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "marl/errors.hpp"
#include "marl/rng.hpp"

namespace marl::env {

void EnvSpec::validate() const {
  require(n_agents >= 1, "EnvSpec: at least one agent required");
  require(episode_length >= 1, "EnvSpec: episode_length must be positive");
  require(obs_dims.size() == n_agents && act_dims.size() == n_agents && action_low.size() == n_agents &&
              action_high.size() == n_agents && agent_names.size() == n_agents,
          "EnvSpec: per-agent lists must have n_agents entries");
  for (std::size_t i = 0; i < n_agents; ++i) {
    require(obs_dims[i] >= 1 && act_dims[i] >= 1, "EnvSpec: dimensions must be positive");
    require(action_low[i].size() == act_dims[i] && action_high[i].size() == act_dims[i],
            "EnvSpec: bounds length must equal act_dim");
    for (std::size_t d = 0; d < act_dims[i]; ++d)
      require(action_low[i][d] < action_high[i][d], "EnvSpec: low must be below high");
  }
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

StepResult Environment::step(EnvState& state, const JointVec& joint_action) const {
  require(state.t < spec_.episode_length, "step called on a finished episode");
  require(joint_action.size() == spec_.n_agents, "joint action must have one entry per agent");
  JointVec clipped(spec_.n_agents);
  for (std::size_t i = 0; i < spec_.n_agents; ++i) {
    require(joint_action[i].size() == spec_.act_dims[i], "action dimension does not match spec");
    clipped[i].resize(spec_.act_dims[i]);
    for (std::size_t d = 0; d < spec_.act_dims[i]; ++d)
      clipped[i][d] = std::clamp(joint_action[i][d], spec_.action_low[i][d], spec_.action_high[i][d]);
  }
  StepResult result;
  result.reward = advance(state, clipped);
  ++state.t;
  result.done = state.t == spec_.episode_length;
  result.observations = observe(state);
  return result;
}

std::vector<std::string> agent_names(const EnvSpec& spec) { return spec.agent_names; }

namespace {

EnvSpec uniform_spec(std::string id, std::size_t n, std::size_t obs_dim, std::size_t act_dim, std::size_t horizon,
                     std::vector<std::string> names) {
  EnvSpec spec;
  spec.env_id = std::move(id);
  spec.n_agents = n;
  spec.obs_dims.assign(n, obs_dim);
  spec.act_dims.assign(n, act_dim);
  spec.action_low.assign(n, Vec(act_dim, -1.0));
  spec.action_high.assign(n, Vec(act_dim, 1.0));
  spec.episode_length = horizon;
  spec.agent_names = std::move(names);
  return spec;
}

std::vector<std::string> cheetah_names(std::size_t n) {
  if (n == 6) return {"BA", "BK", "BH", "FA", "FK", "FH"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back((i < n / 2 ? "B" : "F") + std::to_string(i < n / 2 ? i : i - n / 2));
  return names;
}

std::vector<std::size_t> checked_order(const std::vector<std::size_t>& order, std::size_t n) {
  if (order.empty()) {
    std::vector<std::size_t> identity(n);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    return identity;
  }
  require(order.size() == n, "agent_order must list every agent");
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n; ++i) require(sorted[i] == i, "agent_order must be a permutation");
  return order;
}

std::vector<std::string> reacher_names(const std::vector<std::size_t>& order) {
  std::vector<std::string> names;
  for (std::size_t canonical : order) names.push_back("J" + std::to_string(canonical));
  return names;
}

}  // namespace

ChainCheetah::ChainCheetah(ChainCheetahParams params)
    : Environment(uniform_spec("ChainCheetah", params.n_agents, 4, 1, params.episode_length,
                               cheetah_names(params.n_agents))),
      params_(params) {}

double ChainCheetah::joint_weight(std::size_t i) const {
  return i < params_.n_agents / 2 ? params_.back_weight : params_.front_weight;
}

ResetResult ChainCheetah::reset(std::uint64_t seed) const {
  const std::size_t n = params_.n_agents;
  Rng rng(derive_seed(seed, 0xC4EE7A));
  EnvState state;
  state.s.assign(2 * n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) state.s[i] = rng.uniform(-params_.init_angle_range, params_.init_angle_range);
  state.seed = seed;
  JointVec obs = observe(state);
  return {std::move(state), std::move(obs)};
}

JointVec ChainCheetah::observe(const EnvState& state) const {
  const std::size_t n = params_.n_agents;
  const double v_head = state.s[2 * n];
  JointVec obs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = state.s[i];
    obs[i] = {std::sin(theta), std::cos(theta), state.s[n + i], v_head};
  }
  return obs;
}

double ChainCheetah::advance(EnvState& state, const JointVec& clipped) const {
  const std::size_t n = params_.n_agents;
  const ChainCheetahParams& p = params_;
  std::vector<double> accel(n);
  for (std::size_t i = 0; i < n; ++i) {
    double neighbor_sum = 0.0;
    int neighbors = 0;
    if (i > 0) neighbor_sum += state.s[i - 1], ++neighbors;
    if (i + 1 < n) neighbor_sum += state.s[i + 1], ++neighbors;
    const double neighbor_mean = neighbor_sum / neighbors;
    accel[i] = (clipped[i][0] - p.damping * state.s[n + i] - p.coupling * (state.s[i] - neighbor_mean)) / p.inertia;
  }
  // Semi-implicit Euler: velocities first, then angles with the new velocities.
  for (std::size_t i = 0; i < n; ++i) state.s[n + i] += p.dt * accel[i];
  for (std::size_t i = 0; i < n; ++i) state.s[i] += p.dt * state.s[n + i];
  double v_head = 0.0;
  for (std::size_t i = 0; i < n; ++i) v_head += joint_weight(i) * state.s[n + i] * std::cos(state.s[i]);
  v_head *= p.propulsion;
  state.s[2 * n] = v_head;

  double action_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) action_sq += clipped[i][0] * clipped[i][0];
  return v_head - p.control_cost * action_sq / static_cast<double>(n);
}

JointReacher::JointReacher(JointReacherParams params)
    : Environment(uniform_spec("JointReacher", params.n_agents, 2, 1, params.episode_length,
                               reacher_names(checked_order(params.agent_order, params.n_agents)))),
      params_(std::move(params)) {
  params_.agent_order = checked_order(params_.agent_order, params_.n_agents);
}

ResetResult JointReacher::reset(std::uint64_t seed) const {
  const std::size_t n = params_.n_agents;
  Rng rng(derive_seed(seed, 0x4EAC4E));
  std::vector<double> canonical_goals(n);
  for (double& g : canonical_goals) g = rng.uniform(-1.0, 1.0);
  EnvState state;
  state.s.assign(2 * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) state.s[n + j] = canonical_goals[params_.agent_order[j]];
  state.seed = seed;
  JointVec obs = observe(state);
  return {std::move(state), std::move(obs)};
}

JointVec JointReacher::observe(const EnvState& state) const {
  const std::size_t n = params_.n_agents;
  JointVec obs(n);
  for (std::size_t i = 0; i < n; ++i) obs[i] = {state.s[i], (state.s[n + i] - state.s[i]) / params_.speed};
  return obs;
}

double JointReacher::advance(EnvState& state, const JointVec& clipped) const {
  const std::size_t n = params_.n_agents;
  for (std::size_t i = 0; i < n; ++i) state.s[i] += params_.speed * clipped[i][0];
  // Sum in canonical agent order so relabeled systems see identical rewards.
  std::vector<double> dist(n);
  for (std::size_t j = 0; j < n; ++j) dist[params_.agent_order[j]] = std::abs(state.s[j] - state.s[n + j]);
  double total = 0.0;
  for (double d : dist) total += d;
  return -total / static_cast<double>(n);
}

double JointReacher::optimal_return(std::uint64_t seed) const { return optimal_return_from(reset(seed).state); }

double JointReacher::optimal_return_from(const EnvState& start) const {
  const std::size_t n = params_.n_agents;
  require(start.s.size() == 2 * n, "optimal_return_from: state size must be 2n");
  double total = 0.0;
  for (std::size_t t = start.t + 1; t <= params_.episode_length; ++t) {
    double step_distance = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::abs(start.s[n + i] - start.s[i]);
      step_distance += std::max(d - params_.speed * static_cast<double>(t - start.t), 0.0);
    }
    total -= step_distance / static_cast<double>(n);
  }
  return total;
}

double optimal_return(const Environment& env, std::uint64_t seed) {
  const auto* reacher = dynamic_cast<const JointReacher*>(&env);
  if (reacher == nullptr) throw Unsupported("optimal_return is only defined for JointReacher, not " + env.spec().env_id);
  return reacher->optimal_return(seed);
}

std::unique_ptr<Environment> make_environment(const std::string& env_id, std::size_t n_agents,
                                              std::size_t episode_length, const std::vector<std::size_t>& agent_order) {
  if (env_id == "ChainCheetah") {
    require(agent_order.empty(), "agent_order is only supported by JointReacher");
    ChainCheetahParams p;
    p.n_agents = n_agents;
    p.episode_length = episode_length;
    return std::make_unique<ChainCheetah>(p);
  }
  if (env_id == "JointReacher") {
    JointReacherParams p;
    p.n_agents = n_agents;
    p.episode_length = episode_length;
    p.agent_order = agent_order;
    return std::make_unique<JointReacher>(p);
  }
  throw ConfigError("unknown environment '" + env_id + "'", "env.id");
}

}  // namespace marl::env
