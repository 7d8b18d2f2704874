#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marl/env.hpp"
#include "marl/rng.hpp"

namespace marl::replay {

enum class Source : std::uint8_t { student, teacher };

// One agent's view of an episode (or a window of one). Values are stored as
// float32, the dataset file precision, so stored data round-trips exactly.
struct EpisodeSequence {
  std::size_t agent_id = 0;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::vector<float> observations;  // (length + 1) * obs_dim
  std::vector<float> actions;       // length * act_dim
  std::vector<float> rewards;       // length
  std::vector<std::uint8_t> dones;  // length, 0 or 1
  Source source = Source::student;

  std::size_t length() const noexcept { return rewards.size(); }
  std::span<const float> observation(std::size_t t) const {
    return std::span<const float>(observations).subspan(t * obs_dim, obs_dim);
  }
  std::span<const float> action(std::size_t t) const {
    return std::span<const float>(actions).subspan(t * act_dim, act_dim);
  }

  // Array lengths agree; rewards finite. A complete episode additionally has
  // exactly one done flag, at the final index.
  void validate(bool complete_episode) const;

  // Steps [start, start + len) with the observation that follows them.
  EpisodeSequence window(std::size_t start, std::size_t len) const;

  bool operator==(const EpisodeSequence&) const = default;
};

// Undiscounted sum of the sequence's (shared) rewards.
double sequence_return(const EpisodeSequence& seq);

// FIFO ring of complete episodes for one agent.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t act_dim);

  // Throws ContractViolation on a dimension mismatch; evicts the oldest
  // episode when full.
  void add_episode(EpisodeSequence episode);

  std::size_t size() const noexcept { return episodes_.size(); }
  bool empty() const noexcept { return episodes_.empty(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t insertions() const noexcept { return insertions_; }
  // Oldest first.
  const EpisodeSequence& at(std::size_t i) const { return episodes_.at(i); }

 private:
  std::size_t capacity_;
  std::size_t obs_dim_, act_dim_;
  std::deque<EpisodeSequence> episodes_;
  std::uint64_t insertions_ = 0;
};

struct TeacherDataset {
  env::EnvSpec spec;
  // episodes[agent][k]: agent's view of the k-th logged episode.
  std::vector<std::vector<EpisodeSequence>> episodes;
  std::string quality_tag;
  std::string source_run_id;

  std::size_t episode_count() const { return episodes.empty() ? 0 : episodes.front().size(); }
  // Every agent has a list and all lists have the same length.
  void validate() const;
  bool operator==(const TeacherDataset& other) const;
};

struct MixedBatch {
  std::vector<EpisodeSequence> sequences;  // teacher windows first
  std::size_t teacher_count = 0;
  std::size_t student_count = 0;
};

// Rehearsal sampler: with non-empty teacher data, floor(B/2) windows come from
// the teacher and the rest from the student buffer; otherwise all are student.
// Episodes and window starts are drawn uniformly with replacement. Returns
// nullopt when the student buffer is still empty.
std::optional<MixedBatch> sample_mixed(const ReplayBuffer& buffer, std::span<const EpisodeSequence> teacher,
                                       std::size_t batch_size, std::size_t window, Rng& rng);

// Keeps the last ceil(fraction * count) episodes in their original order.
// Tags "good" for 0.2, "good-medium" for 0.4, "custom" otherwise.
TeacherDataset slice_by_quality(const TeacherDataset& log, double trailing_fraction);

std::string quality_tag_for(double trailing_fraction);

struct Histogram {
  std::vector<double> edges;        // bin_count + 1 entries
  std::vector<std::size_t> counts;  // bin_count entries
};

// Equal-width bins over [min, max] of per-episode undiscounted returns; the
// last bin is closed on the right.
Histogram dataset_return_histogram(const TeacherDataset& dataset, std::size_t bin_count);

}  // namespace marl::replay
