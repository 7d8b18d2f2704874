#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace marl::env {

using Vec = std::vector<double>;
using JointVec = std::vector<Vec>;

struct EnvSpec {
  std::string env_id;
  std::size_t n_agents = 0;
  std::vector<std::size_t> obs_dims;
  std::vector<std::size_t> act_dims;
  std::vector<Vec> action_low;   // per agent, per action dimension
  std::vector<Vec> action_high;
  std::size_t episode_length = 0;
  std::vector<std::string> agent_names;

  // Throws ContractViolation when an invariant does not hold.
  void validate() const;
};

struct EnvState {
  Vec s;  // environment-specific layout
  std::size_t t = 0;
  std::uint64_t seed = 0;
};

struct ResetResult {
  EnvState state;
  JointVec observations;
};

struct StepResult {
  JointVec observations;
  double reward = 0.0;
  bool done = false;
};

// Dec-POMDP with a shared reward and fixed horizon. Instances hold only
// immutable parameters; all mutable state lives in EnvState.
class Environment {
 public:
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }

  // Same seed gives a bit-identical state and observations.
  virtual ResetResult reset(std::uint64_t seed) const = 0;

  // Clips each action to its bounds, advances one step. Terminates exactly at
  // t == episode_length; stepping past that is a contract violation.
  StepResult step(EnvState& state, const JointVec& joint_action) const;

  virtual JointVec observe(const EnvState& state) const = 0;

 protected:
  explicit Environment(EnvSpec spec);
  virtual double advance(EnvState& state, const JointVec& clipped) const = 0;

  EnvSpec spec_;
};

std::vector<std::string> agent_names(const EnvSpec& spec);

// Planar chain of n torque-driven joints standing in for a multi-joint
// runner. State layout: [theta_0..n-1, theta_dot_0..n-1, v_head].
struct ChainCheetahParams {
  std::size_t n_agents = 6;
  std::size_t episode_length = 200;
  double dt = 0.05;
  double damping = 0.5;     // k_d
  double coupling = 0.3;    // k_c
  double propulsion = 1.0;  // k_p
  double inertia = 1.0;
  double back_weight = 0.8;
  double front_weight = 1.2;
  double control_cost = 0.01;
  double init_angle_range = 0.1;  // reset angles ~ U(-range, range)
};

class ChainCheetah final : public Environment {
 public:
  explicit ChainCheetah(ChainCheetahParams params = {});

  ResetResult reset(std::uint64_t seed) const override;
  JointVec observe(const EnvState& state) const override;

  const ChainCheetahParams& params() const { return params_; }
  double joint_weight(std::size_t i) const;

 private:
  double advance(EnvState& state, const JointVec& clipped) const override;
  ChainCheetahParams params_;
};

// n scalar coordinates steered toward per-episode goals.
// State layout: [p_0..n-1, g_0..n-1]. Observation of agent i: [p_i, (g_i - p_i) / speed],
// the offset measured in full-speed steps.
struct JointReacherParams {
  std::size_t n_agents = 2;
  std::size_t episode_length = 20;
  double speed = 0.1;
  // Optional relabeling: agent at index j plays canonical agent order[j].
  // Goals and names follow the canonical agent, so a consistent permutation of
  // plan and environment describes the same system.
  std::vector<std::size_t> agent_order;
};

class JointReacher final : public Environment {
 public:
  explicit JointReacher(JointReacherParams params = {});

  ResetResult reset(std::uint64_t seed) const override;
  JointVec observe(const EnvState& state) const override;

  // Best achievable undiscounted return for the episode started from `seed`:
  // each agent moves at full speed toward its goal and then stays there.
  double optimal_return(std::uint64_t seed) const;
  // Same, continuing from an arbitrary state at time start.t.
  double optimal_return_from(const EnvState& start) const;

  const JointReacherParams& params() const { return params_; }

 private:
  double advance(EnvState& state, const JointVec& clipped) const override;
  JointReacherParams params_;
};

// Shared-reward optimum for the diagnostic task; throws Unsupported for any
// other environment.
double optimal_return(const Environment& env, std::uint64_t seed);

// Builds a registered environment ("ChainCheetah" or "JointReacher").
std::unique_ptr<Environment> make_environment(const std::string& env_id, std::size_t n_agents,
                                              std::size_t episode_length,
                                              const std::vector<std::size_t>& agent_order = {});

}  // namespace marl::env
