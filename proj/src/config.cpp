#include "marl/config.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "marl/errors.hpp"
#include "marl/hashing.hpp"

namespace marl::config {

using nlohmann::json;

json to_json(const ExperimentConfig& cfg) {
  const learner::TrainingConfig& t = cfg.train;
  json doc;
  doc["env"] = {{"id", t.env.id},
                {"n_agents", t.env.n_agents},
                {"episode_length", t.env.episode_length},
                {"agent_order", t.env.agent_order}};
  doc["train"] = {{"total_env_steps", t.total_env_steps},
                  {"teacher_phase_steps", t.teacher_phase_steps},
                  {"warmup_steps", t.warmup_steps},
                  {"train_every", t.train_every},
                  {"gamma", t.gamma},
                  {"lambda", t.lambda},
                  {"tau", t.tau},
                  {"policy_lr", t.policy_lr},
                  {"critic_lr", t.critic_lr},
                  {"batch_size", t.batch_size},
                  {"window", t.window},
                  {"noise_start", t.noise_start},
                  {"noise_end", t.noise_end},
                  {"noise_decay_fraction", t.noise_decay_fraction},
                  {"gru_hidden", t.gru_hidden},
                  {"dense", t.dense},
                  {"replay_capacity", t.replay_capacity},
                  {"seed", t.seed},
                  {"log_experience", t.log_experience},
                  {"save_checkpoint", t.save_checkpoint}};
  doc["teacher"] = {{"dataset", t.teacher_dataset}, {"agent_datasets", json(t.agent_datasets)}};
  doc["sweep"] = {{"seeds", cfg.sweep.seeds},
                  {"x", cfg.sweep.x},
                  {"plans", cfg.sweep.plans},
                  {"parallelism", cfg.sweep.parallelism}};
  return doc;
}

namespace {

// Sections whose keys are user-chosen rather than fixed.
bool free_form(const std::string& path) { return path == "teacher.agent_datasets"; }

void collect_paths(const json& schema, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = schema.begin(); it != schema.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    out.push_back(path);
    if (it->is_object() && !free_form(path)) collect_paths(*it, path, out);
  }
}

std::vector<std::string> known_paths() {
  std::vector<std::string> out;
  collect_paths(to_json(ExperimentConfig{}), "", out);
  return out;
}

[[noreturn]] void unknown_key(const std::string& path) {
  const std::string hint = nearest_match(path, known_paths());
  throw ConfigError("unknown config key '" + path + "'" + (hint.empty() ? "" : " (did you mean '" + hint + "'?)"),
                    path);
}

void check_keys(const json& doc, const json& schema, const std::string& prefix) {
  if (!doc.is_object()) throw ConfigError("expected an object at '" + (prefix.empty() ? "<root>" : prefix) + "'", prefix);
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!schema.contains(it.key())) unknown_key(path);
    const json& sub = schema.at(it.key());
    if (sub.is_object() && !free_form(path)) check_keys(*it, sub, path);
  }
}

template <typename T>
void read(const json& doc, const char* section, const char* key, T& out) {
  if (!doc.contains(section) || !doc.at(section).contains(key)) return;
  const std::string path = std::string(section) + "." + key;
  const json& v = doc.at(section).at(key);
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("'" + path + "' must be a non-negative integer", path);
    }
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("'" + path + "' must be true or false", path);
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("'" + path + "' must be a number", path);
    }
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "' has the wrong type: " + e.what(), path);
  }
}

}  // namespace

ExperimentConfig from_json(const json& doc) {
  check_keys(doc, to_json(ExperimentConfig{}), "");
  ExperimentConfig cfg;
  learner::TrainingConfig& t = cfg.train;
  read(doc, "env", "id", t.env.id);
  read(doc, "env", "n_agents", t.env.n_agents);
  read(doc, "env", "episode_length", t.env.episode_length);
  read(doc, "env", "agent_order", t.env.agent_order);
  read(doc, "train", "total_env_steps", t.total_env_steps);
  read(doc, "train", "teacher_phase_steps", t.teacher_phase_steps);
  read(doc, "train", "warmup_steps", t.warmup_steps);
  read(doc, "train", "train_every", t.train_every);
  read(doc, "train", "gamma", t.gamma);
  read(doc, "train", "lambda", t.lambda);
  read(doc, "train", "tau", t.tau);
  read(doc, "train", "policy_lr", t.policy_lr);
  read(doc, "train", "critic_lr", t.critic_lr);
  read(doc, "train", "batch_size", t.batch_size);
  read(doc, "train", "window", t.window);
  read(doc, "train", "noise_start", t.noise_start);
  read(doc, "train", "noise_end", t.noise_end);
  read(doc, "train", "noise_decay_fraction", t.noise_decay_fraction);
  read(doc, "train", "gru_hidden", t.gru_hidden);
  read(doc, "train", "dense", t.dense);
  read(doc, "train", "replay_capacity", t.replay_capacity);
  read(doc, "train", "seed", t.seed);
  read(doc, "train", "log_experience", t.log_experience);
  read(doc, "train", "save_checkpoint", t.save_checkpoint);
  read(doc, "teacher", "dataset", t.teacher_dataset);
  read(doc, "teacher", "agent_datasets", t.agent_datasets);
  read(doc, "sweep", "seeds", cfg.sweep.seeds);
  read(doc, "sweep", "x", cfg.sweep.x);
  read(doc, "sweep", "plans", cfg.sweep.plans);
  read(doc, "sweep", "parallelism", cfg.sweep.parallelism);
  t.validate();
  return cfg;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("override must look like key.path=value, got '" + std::string(assignment) + "'");
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));

  const auto paths = known_paths();
  const bool known = std::find(paths.begin(), paths.end(), path) != paths.end();
  const bool dataset_entry = path.rfind("teacher.agent_datasets.", 0) == 0;
  if (!known && !dataset_entry) unknown_key(path);

  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json doc = json::parse(in, nullptr, false, true);
  if (doc.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  for (const std::string& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

std::string canonical_text(const ExperimentConfig& cfg) { return to_json(cfg).dump(); }

std::string config_hash(const ExperimentConfig& cfg) { return sha256_hex(canonical_text(cfg)); }

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string nearest_match(std::string_view key, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_distance = std::string::npos;
  for (const std::string& c : candidates) {
    const std::size_t d = edit_distance(key, c);
    if (d < best_distance) {
      best_distance = d;
      best = c;
    }
  }
  return best;
}

}  // namespace marl::config
