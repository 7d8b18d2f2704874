#include "marl/replay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "marl/errors.hpp"

namespace marl::replay {

void EpisodeSequence::validate(bool complete_episode) const {
  const std::size_t len = rewards.size();
  require(len >= 1, "episode sequence must contain at least one step");
  require(obs_dim >= 1 && act_dim >= 1, "episode sequence dimensions must be positive");
  require(observations.size() == (len + 1) * obs_dim, "observations must hold length + 1 entries");
  require(actions.size() == len * act_dim, "actions must hold length entries");
  require(dones.size() == len, "dones must hold length entries");
  for (float r : rewards) require(std::isfinite(r), "rewards must be finite");
  if (complete_episode) {
    for (std::size_t t = 0; t + 1 < len; ++t) require(dones[t] == 0, "done flag before the final step");
    require(dones[len - 1] == 1, "complete episode must end with done");
  }
}

EpisodeSequence EpisodeSequence::window(std::size_t start, std::size_t len) const {
  require(len >= 1 && start + len <= length(), "window exceeds sequence length");
  EpisodeSequence w;
  w.agent_id = agent_id;
  w.obs_dim = obs_dim;
  w.act_dim = act_dim;
  w.source = source;
  w.observations.assign(observations.begin() + static_cast<std::ptrdiff_t>(start * obs_dim),
                        observations.begin() + static_cast<std::ptrdiff_t>((start + len + 1) * obs_dim));
  w.actions.assign(actions.begin() + static_cast<std::ptrdiff_t>(start * act_dim),
                   actions.begin() + static_cast<std::ptrdiff_t>((start + len) * act_dim));
  w.rewards.assign(rewards.begin() + static_cast<std::ptrdiff_t>(start),
                   rewards.begin() + static_cast<std::ptrdiff_t>(start + len));
  w.dones.assign(dones.begin() + static_cast<std::ptrdiff_t>(start), dones.begin() + static_cast<std::ptrdiff_t>(start + len));
  return w;
}

double sequence_return(const EpisodeSequence& seq) {
  double total = 0.0;
  for (float r : seq.rewards) total += r;
  return total;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t act_dim)
    : capacity_(capacity), obs_dim_(obs_dim), act_dim_(act_dim) {
  require(capacity >= 1, "replay capacity must be positive");
}

void ReplayBuffer::add_episode(EpisodeSequence episode) {
  require(episode.obs_dim == obs_dim_ && episode.act_dim == act_dim_, "episode dimensions do not match the buffer");
  episode.validate(true);
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
  ++insertions_;
}

void TeacherDataset::validate() const {
  require(episodes.size() == spec.n_agents, "dataset must hold an episode list for every agent");
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    require(episodes[i].size() == episodes.front().size(), "episode counts differ across agents");
    for (const EpisodeSequence& ep : episodes[i]) {
      require(ep.obs_dim == spec.obs_dims[i] && ep.act_dim == spec.act_dims[i], "episode dimensions do not match spec");
      require(ep.length() == spec.episode_length, "episode length does not match spec");
    }
  }
}

bool TeacherDataset::operator==(const TeacherDataset& other) const {
  return spec.env_id == other.spec.env_id && spec.n_agents == other.spec.n_agents &&
         spec.obs_dims == other.spec.obs_dims && spec.act_dims == other.spec.act_dims &&
         spec.episode_length == other.spec.episode_length && quality_tag == other.quality_tag &&
         source_run_id == other.source_run_id && episodes == other.episodes;
}

namespace {

EpisodeSequence random_window(const EpisodeSequence& episode, std::size_t window, Rng& rng) {
  require(window >= 1 && window <= episode.length(), "window must not exceed episode length");
  const std::size_t start = static_cast<std::size_t>(rng.index(episode.length() - window + 1));
  return episode.window(start, window);
}

}  // namespace

std::optional<MixedBatch> sample_mixed(const ReplayBuffer& buffer, std::span<const EpisodeSequence> teacher,
                                       std::size_t batch_size, std::size_t window, Rng& rng) {
  require(batch_size >= 1, "batch size must be positive");
  if (buffer.empty()) return std::nullopt;
  MixedBatch batch;
  batch.teacher_count = teacher.empty() ? 0 : batch_size / 2;
  batch.student_count = batch_size - batch.teacher_count;
  batch.sequences.reserve(batch_size);
  for (std::size_t k = 0; k < batch.teacher_count; ++k) {
    EpisodeSequence w = random_window(teacher[rng.index(teacher.size())], window, rng);
    w.source = Source::teacher;
    batch.sequences.push_back(std::move(w));
  }
  for (std::size_t k = 0; k < batch.student_count; ++k) {
    EpisodeSequence w = random_window(buffer.at(rng.index(buffer.size())), window, rng);
    w.source = Source::student;
    batch.sequences.push_back(std::move(w));
  }
  return batch;
}

std::string quality_tag_for(double fraction) {
  if (std::abs(fraction - 0.2) < 1e-12) return "good";
  if (std::abs(fraction - 0.4) < 1e-12) return "good-medium";
  return "custom";
}

TeacherDataset slice_by_quality(const TeacherDataset& log, double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "trailing fraction must lie in (0, 1]");
  const std::size_t count = log.episode_count();
  if (count == 0) throw ContractViolation("cannot slice an empty experience log");
  // The small tolerance keeps 0.2 * 10 at 2 rather than ceil(2.0000000000000004) = 3.
  const auto keep = std::min<std::size_t>(count, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(count) - 1e-9)));
  TeacherDataset out;
  out.spec = log.spec;
  out.quality_tag = quality_tag_for(fraction);
  out.source_run_id = log.source_run_id;
  out.episodes.resize(log.episodes.size());
  for (std::size_t a = 0; a < log.episodes.size(); ++a) {
    const auto& src = log.episodes[a];
    out.episodes[a].assign(src.end() - static_cast<std::ptrdiff_t>(keep), src.end());
  }
  return out;
}

Histogram dataset_return_histogram(const TeacherDataset& dataset, std::size_t bin_count) {
  require(bin_count >= 1, "histogram needs at least one bin");
  require(dataset.episode_count() > 0, "histogram of an empty dataset");
  std::vector<double> returns;
  for (const EpisodeSequence& ep : dataset.episodes.front()) returns.push_back(sequence_return(ep));
  const auto [lo_it, hi_it] = std::minmax_element(returns.begin(), returns.end());
  const double lo = *lo_it, hi = *hi_it;
  Histogram h;
  h.counts.assign(bin_count, 0);
  const double width = (hi - lo) / static_cast<double>(bin_count);
  for (std::size_t b = 0; b <= bin_count; ++b) h.edges.push_back(b == bin_count ? hi : lo + width * static_cast<double>(b));
  for (double r : returns) {
    std::size_t bin = 0;
    if (width > 0.0) bin = std::min(bin_count - 1, static_cast<std::size_t>((r - lo) / width));
    ++h.counts[bin];
  }
  return h;
}

}  // namespace marl::replay
