#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "marl/env.hpp"
#include "marl/replay.hpp"

namespace marl::learner {

// Which agents train with teacher data (X) and which start from scratch (Y).
// Bit i of the mask set means agent i is reincarnated.
class ReincarnationPlan {
 public:
  ReincarnationPlan() = default;
  ReincarnationPlan(std::size_t n_agents, std::uint64_t bitmask);
  static ReincarnationPlan from_names(const std::vector<std::string>& agent_names,
                                      const std::vector<std::string>& reincarnated);
  static ReincarnationPlan tabula_rasa_plan(std::size_t n_agents) { return {n_agents, 0}; }
  static ReincarnationPlan fully_reincarnated(std::size_t n_agents) { return {n_agents, (std::uint64_t{1} << n_agents) - 1}; }

  std::size_t n_agents() const noexcept { return n_agents_; }
  std::uint64_t bitmask() const noexcept { return bitmask_; }
  bool is_reincarnated(std::size_t agent) const { return (bitmask_ >> agent) & 1U; }
  std::vector<std::size_t> reincarnated() const;
  std::vector<std::size_t> tabula_rasa() const;
  std::size_t x() const { return reincarnated().size(); }
  std::size_t y() const { return n_agents_ - x(); }

  // "{BA,FK}" style label; "{}" for tabula rasa.
  std::string label(const std::vector<std::string>& agent_names) const;

  bool operator==(const ReincarnationPlan&) const = default;

 private:
  std::size_t n_agents_ = 0;
  std::uint64_t bitmask_ = 0;
};

struct EnvConfig {
  std::string id = "JointReacher";
  std::size_t n_agents = 2;
  std::size_t episode_length = 20;
  std::vector<std::size_t> agent_order;  // JointReacher relabeling, empty = identity
};

struct TrainingConfig {
  EnvConfig env;
  std::size_t total_env_steps = 25000;
  std::size_t teacher_phase_steps = 20000;
  std::size_t warmup_steps = 1000;
  std::size_t train_every = 1;
  double gamma = 0.99;
  double lambda = 0.8;
  double tau = 0.005;
  double policy_lr = 1e-3;
  double critic_lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t window = 10;
  double noise_start = 0.1;
  double noise_end = 0.02;
  double noise_decay_fraction = 0.5;
  std::size_t gru_hidden = 64;
  std::size_t dense = 64;
  std::size_t replay_capacity = 5000;
  std::uint64_t seed = 0;
  // Dataset used by every reincarnated agent, unless overridden per agent name.
  std::string teacher_dataset;
  std::map<std::string, std::string> agent_datasets;
  bool log_experience = false;
  bool save_checkpoint = false;

  // Throws ConfigError naming the offending key.
  void validate() const;
  // Exploration noise after `env_step` completed steps.
  double noise_scale(std::size_t env_step) const;
  std::string dataset_for(const std::string& agent_name) const;
};

struct CurvePoint {
  std::uint64_t step = 0;
  double episode_return = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct ReturnCurve {
  std::vector<CurvePoint> points;
  std::uint64_t plan_bitmask = 0;
  std::uint64_t seed = 0;
  std::string dataset_quality;  // empty for tabula rasa

  bool operator==(const ReturnCurve&) const = default;
};

// Discounted sum of rewards: sum_t gamma^t r_t.
double episode_return(std::span<const double> rewards, double gamma);

struct TrainingResult {
  ReturnCurve curve;
  // Teacher windows sampled before / at-or-after the teacher phase boundary.
  std::uint64_t teacher_sequences_in_phase = 0;
  std::uint64_t teacher_sequences_after_phase = 0;
  std::uint64_t gradient_updates = 0;
  // (agent name, dataset path) for every teacher file an agent opened.
  std::vector<std::pair<std::string, std::string>> dataset_reads;
  std::map<std::string, std::string> dataset_hashes;  // path -> sha256
  std::optional<replay::TeacherDataset> experience_log;
  nlohmann::json checkpoint;  // null unless config.save_checkpoint
  std::vector<std::string> agent_names;
};

// One complete run. Deterministic given (config, plan). Missing or mismatched
// teacher datasets raise ConfigError before the first environment step.
TrainingResult run_training(const TrainingConfig& config, const ReincarnationPlan& plan,
                            const std::string& run_id = {});

// Reset seed of the k-th training episode of a run.
std::uint64_t episode_seed(std::uint64_t run_seed, std::uint64_t episode_index);

std::string default_run_id(const ReincarnationPlan& plan, std::uint64_t seed);

}  // namespace marl::learner
