#include "marl/learner.hpp"

#include <algorithm>
#include <memory>

#include "marl/agent.hpp"
#include "marl/dataset_io.hpp"
#include "marl/errors.hpp"
#include "marl/hashing.hpp"
#include "marl/rng.hpp"

namespace marl::learner {

ReincarnationPlan::ReincarnationPlan(std::size_t n_agents, std::uint64_t bitmask)
    : n_agents_(n_agents), bitmask_(bitmask) {
  require(n_agents >= 1 && n_agents < 64, "plan: agent count must lie in [1, 63]");
  require((bitmask >> n_agents) == 0, "plan: bitmask names agents beyond n_agents");
}

ReincarnationPlan ReincarnationPlan::from_names(const std::vector<std::string>& agent_names,
                                                const std::vector<std::string>& reincarnated) {
  std::uint64_t mask = 0;
  for (const std::string& name : reincarnated) {
    const auto it = std::find(agent_names.begin(), agent_names.end(), name);
    if (it == agent_names.end()) throw ConfigError("unknown agent name '" + name + "'");
    mask |= std::uint64_t{1} << (it - agent_names.begin());
  }
  return {agent_names.size(), mask};
}

std::vector<std::size_t> ReincarnationPlan::reincarnated() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_agents_; ++i)
    if (is_reincarnated(i)) out.push_back(i);
  return out;
}

std::vector<std::size_t> ReincarnationPlan::tabula_rasa() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n_agents_; ++i)
    if (!is_reincarnated(i)) out.push_back(i);
  return out;
}

std::string ReincarnationPlan::label(const std::vector<std::string>& agent_names) const {
  std::string s = "{";
  bool first = true;
  for (std::size_t i : reincarnated()) {
    if (!first) s += ",";
    s += i < agent_names.size() ? agent_names[i] : std::to_string(i);
    first = false;
  }
  return s + "}";
}

void TrainingConfig::validate() const {
  auto check = [](bool ok, const char* key, const std::string& message) {
    if (!ok) throw ConfigError(std::string(key) + ": " + message, key);
  };
  check(env.n_agents >= 2, "env.n_agents", "at least two agents required");
  check(env.episode_length >= 1, "env.episode_length", "must be positive");
  check(total_env_steps >= 1, "train.total_env_steps", "must be positive");
  check(teacher_phase_steps <= total_env_steps, "train.teacher_phase_steps", "must not exceed total_env_steps");
  check(train_every >= 1, "train.train_every", "must be positive");
  check(gamma > 0.0 && gamma <= 1.0, "train.gamma", "must lie in (0, 1]");
  check(lambda >= 0.0 && lambda <= 1.0, "train.lambda", "must lie in [0, 1]");
  check(tau >= 0.0 && tau <= 1.0, "train.tau", "must lie in [0, 1]");
  check(policy_lr > 0.0, "train.policy_lr", "must be positive");
  check(critic_lr > 0.0, "train.critic_lr", "must be positive");
  check(batch_size >= 1, "train.batch_size", "must be positive");
  check(window >= 1 && window <= env.episode_length, "train.window", "must lie in [1, episode_length]");
  check(noise_start >= 0.0 && noise_end >= 0.0, "train.noise_start", "noise scales must be non-negative");
  check(noise_decay_fraction > 0.0 && noise_decay_fraction <= 1.0, "train.noise_decay_fraction",
        "must lie in (0, 1]");
  check(gru_hidden >= 1, "train.gru_hidden", "must be positive");
  check(dense >= 1, "train.dense", "must be positive");
  check(replay_capacity >= 1, "train.replay_capacity", "must be positive");
}

double TrainingConfig::noise_scale(std::size_t env_step) const {
  const double horizon = noise_decay_fraction * static_cast<double>(total_env_steps);
  const double progress = std::min(1.0, static_cast<double>(env_step) / horizon);
  return noise_start + (noise_end - noise_start) * progress;
}

std::string TrainingConfig::dataset_for(const std::string& agent_name) const {
  const auto it = agent_datasets.find(agent_name);
  return it != agent_datasets.end() ? it->second : teacher_dataset;
}

double episode_return(std::span<const double> rewards, double gamma) {
  double total = 0.0, discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

std::string default_run_id(const ReincarnationPlan& plan, std::uint64_t seed) {
  return "b" + std::to_string(plan.bitmask()) + "_s" + std::to_string(seed);
}

namespace {

constexpr std::uint64_t kEpisodeStream = 0xE9150DE;
constexpr std::uint64_t kAgentStream = 0xA6E47;

// Loads each distinct teacher file once, only for reincarnated agents.
struct TeacherData {
  std::vector<std::shared_ptr<const replay::TeacherDataset>> per_agent;  // null for tabula rasa agents
  std::vector<std::size_t> slot;  // index of the agent's episodes within its dataset

  std::span<const replay::EpisodeSequence> episodes(std::size_t agent) const {
    if (!per_agent[agent]) return {};
    return per_agent[agent]->episodes[slot[agent]];
  }
};

TeacherData load_teachers(const TrainingConfig& cfg, const ReincarnationPlan& plan, const env::EnvSpec& spec,
                          TrainingResult& result) {
  TeacherData data;
  data.per_agent.resize(spec.n_agents);
  data.slot.assign(spec.n_agents, 0);
  std::map<std::string, std::shared_ptr<const replay::TeacherDataset>> cache;
  for (std::size_t i : plan.reincarnated()) {
    const std::string& name = spec.agent_names[i];
    const std::string path = cfg.dataset_for(name);
    if (path.empty()) throw ConfigError("no teacher dataset configured for reincarnated agent " + name, "teacher.dataset");
    auto it = cache.find(path);
    if (it == cache.end()) {
      std::shared_ptr<const replay::TeacherDataset> ds;
      try {
        ds = std::make_shared<const replay::TeacherDataset>(replay::load_dataset(path));
        result.dataset_hashes[path] = sha256_file(path);
      } catch (const replay::DatasetError& e) {
        throw ConfigError("teacher dataset " + path + ": " + e.what(), "teacher.dataset");
      }
      if (ds->spec.env_id != spec.env_id || ds->spec.n_agents != spec.n_agents || ds->spec.obs_dims != spec.obs_dims ||
          ds->spec.act_dims != spec.act_dims || ds->spec.episode_length != spec.episode_length)
        throw ConfigError("teacher dataset " + path + " was recorded for a different environment spec", "teacher.dataset");
      if (ds->episode_count() == 0) throw ConfigError("teacher dataset " + path + " holds no episodes", "teacher.dataset");
      it = cache.emplace(path, std::move(ds)).first;
    }
    result.dataset_reads.emplace_back(name, path);
    const auto& names = it->second->spec.agent_names;
    const auto pos = std::find(names.begin(), names.end(), name);
    if (pos == names.end()) throw ConfigError("teacher dataset " + path + " has no agent " + name, "teacher.dataset");
    data.slot[i] = static_cast<std::size_t>(pos - names.begin());
    data.per_agent[i] = it->second;
  }
  return data;
}

replay::EpisodeSequence begin_episode(std::size_t agent, const env::EnvSpec& spec, const env::Vec& first_obs) {
  replay::EpisodeSequence ep;
  ep.agent_id = agent;
  ep.obs_dim = spec.obs_dims[agent];
  ep.act_dim = spec.act_dims[agent];
  ep.observations.assign(first_obs.begin(), first_obs.end());
  return ep;
}

}  // namespace

std::uint64_t episode_seed(std::uint64_t run_seed, std::uint64_t episode_index) {
  return derive_seed(derive_seed(run_seed, kEpisodeStream), episode_index);
}

TrainingResult run_training(const TrainingConfig& config, const ReincarnationPlan& plan, const std::string& run_id) {
  config.validate();
  const auto environment = env::make_environment(config.env.id, config.env.n_agents, config.env.episode_length,
                                                 config.env.agent_order);
  const env::EnvSpec& spec = environment->spec();
  if (plan.n_agents() != spec.n_agents) throw ConfigError("plan agent count does not match the environment", "env.n_agents");

  TrainingResult result;
  result.agent_names = spec.agent_names;
  const TeacherData teachers = load_teachers(config, plan, spec, result);

  const std::size_t n = spec.n_agents;
  std::vector<std::unique_ptr<agents::AgentNets>> nets;
  std::vector<Rng> rngs;
  std::vector<replay::ReplayBuffer> buffers;
  for (std::size_t i = 0; i < n; ++i) {
    // Seeds follow the agent's name so a relabeled system trains identically.
    const std::uint64_t tag = label_tag(spec.agent_names[i]);
    agents::NetworkShape shape{spec.obs_dims[i], spec.act_dims[i], config.gru_hidden, config.dense,
                               spec.action_low[i], spec.action_high[i]};
    nets.push_back(std::make_unique<agents::AgentNets>(shape, derive_seed(config.seed, tag),
                                                       agents::Learning{config.policy_lr, config.critic_lr}));
    rngs.emplace_back(derive_seed(derive_seed(config.seed, kAgentStream), tag));
    buffers.emplace_back(config.replay_capacity, spec.obs_dims[i], spec.act_dims[i]);
  }

  result.curve.plan_bitmask = plan.bitmask();
  result.curve.seed = config.seed;
  if (plan.x() > 0) {
    for (std::size_t i : plan.reincarnated()) {
      result.curve.dataset_quality = teachers.per_agent[i]->quality_tag;
      break;
    }
  }
  if (config.log_experience) {
    replay::TeacherDataset log;
    log.spec = spec;
    log.episodes.resize(n);
    log.quality_tag = "full";
    log.source_run_id = run_id.empty() ? default_run_id(plan, config.seed) : run_id;
    result.experience_log = std::move(log);
  }

  const agents::UpdateConfig update{config.gamma, config.lambda, config.tau};
  std::uint64_t episode_index = 0;
  auto start = environment->reset(episode_seed(config.seed, episode_index));
  env::EnvState state = std::move(start.state);
  env::JointVec obs = std::move(start.observations);
  std::vector<agents::HiddenState> hidden;
  std::vector<replay::EpisodeSequence> episodes;
  for (std::size_t i = 0; i < n; ++i) {
    hidden.push_back(agents::HiddenState::zeros(*nets[i]));
    episodes.push_back(begin_episode(i, spec, obs[i]));
  }
  double running_return = 0.0;

  for (std::size_t env_step = 0; env_step < config.total_env_steps;) {
    env::JointVec joint_action(n);
    const bool warmup = env_step < config.warmup_steps;
    const double noise = config.noise_scale(env_step);
    for (std::size_t i = 0; i < n; ++i) {
      if (warmup) {
        // Uniform actions during warmup; the policy still tracks the history.
        agents::select_action(*nets[i], obs[i], hidden[i], 0.0, rngs[i]);
        joint_action[i].resize(spec.act_dims[i]);
        for (std::size_t d = 0; d < spec.act_dims[i]; ++d)
          joint_action[i][d] = rngs[i].uniform(spec.action_low[i][d], spec.action_high[i][d]);
      } else {
        joint_action[i] = agents::select_action(*nets[i], obs[i], hidden[i], noise, rngs[i]);
      }
    }
    const env::StepResult step = environment->step(state, joint_action);
    ++env_step;
    running_return += step.reward;
    for (std::size_t i = 0; i < n; ++i) {
      replay::EpisodeSequence& ep = episodes[i];
      ep.observations.insert(ep.observations.end(), step.observations[i].begin(), step.observations[i].end());
      ep.actions.insert(ep.actions.end(), joint_action[i].begin(), joint_action[i].end());
      ep.rewards.push_back(static_cast<float>(step.reward));
      ep.dones.push_back(step.done ? 1 : 0);
    }
    obs = step.observations;

    if (step.done) {
      result.curve.points.push_back({env_step, running_return});
      running_return = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (result.experience_log) {
          replay::EpisodeSequence copy = episodes[i];
          copy.source = replay::Source::teacher;
          result.experience_log->episodes[i].push_back(std::move(copy));
        }
        buffers[i].add_episode(std::move(episodes[i]));
      }
      ++episode_index;
      auto next = environment->reset(episode_seed(config.seed, episode_index));
      state = std::move(next.state);
      obs = std::move(next.observations);
      for (std::size_t i = 0; i < n; ++i) {
        hidden[i] = agents::HiddenState::zeros(*nets[i]);
        episodes[i] = begin_episode(i, spec, obs[i]);
      }
    }

    if (env_step < config.warmup_steps || env_step % config.train_every != 0) continue;
    const bool teacher_phase = env_step < config.teacher_phase_steps;
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const replay::EpisodeSequence> teacher;
      if (teacher_phase) teacher = teachers.episodes(i);
      auto batch = replay::sample_mixed(buffers[i], teacher, config.batch_size, config.window, rngs[i]);
      if (!batch) continue;
      (teacher_phase ? result.teacher_sequences_in_phase : result.teacher_sequences_after_phase) += batch->teacher_count;
      agents::ddpg_update(*nets[i], agents::make_sequence_batch(batch->sequences), update);
      ++result.gradient_updates;
    }
  }

  if (config.save_checkpoint) {
    result.checkpoint = nlohmann::json::object();
    for (std::size_t i = 0; i < n; ++i) result.checkpoint[spec.agent_names[i]] = agents::export_weights(*nets[i]);
  }
  return result;
}

}  // namespace marl::learner
