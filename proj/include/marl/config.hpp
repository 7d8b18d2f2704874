#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "marl/learner.hpp"

// Experiment configuration files are JSON with four sections:
//   env     { id, n_agents, episode_length, agent_order }
//   train   { every TrainingConfig hyperparameter }
//   teacher { dataset, agent_datasets { <agent name>: path } }
//   sweep   { seeds, x, plans, parallelism }
// Overrides are "dotted.path=value" strings; the value is parsed as JSON when
// possible and taken as a plain string otherwise.
namespace marl::config {

struct SweepSettings {
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  // -1 enumerates every subset; otherwise only plans with x reincarnated agents.
  int x = -1;
  // Explicit plan bitmasks; when non-empty they replace the x filter.
  std::vector<std::uint64_t> plans;
  std::size_t parallelism = 1;
};

struct ExperimentConfig {
  learner::TrainingConfig train;
  SweepSettings sweep;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Rejects unknown keys (with the closest known key as a suggestion) and
// mistyped values; both raise ConfigError carrying the dotted key path.
ExperimentConfig from_json(const nlohmann::json& doc);

void apply_override(nlohmann::json& doc, std::string_view assignment);

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Sorted-key compact JSON; stable input for hashing.
std::string canonical_text(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

std::size_t edit_distance(std::string_view a, std::string_view b);
std::string nearest_match(std::string_view key, const std::vector<std::string>& candidates);

}  // namespace marl::config
