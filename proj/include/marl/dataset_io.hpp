#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "marl/replay.hpp"

// Teacher dataset file:
//   "MARLDS1\0" | u32 header_len | header (UTF-8 JSON) | body
// The header carries format_version, env_id, n_agents, obs_dims, act_dims,
// episode_length, agent_names (optional on read), quality_tag, source_run_id
// and episode_count. The body
// lists, per episode and per agent in index order, four arrays
// (observations, actions, rewards, dones), each a u32 element count followed
// by little-endian float32 values. Dones are stored as 0.0 / 1.0.
namespace marl::replay {

enum class DatasetErrc {
  io,
  bad_magic,
  truncated,
  bad_header,
  agent_count_mismatch,
  dimension_mismatch,
  invalid_value,
  trailing_data,
};

const char* to_string(DatasetErrc code);

class DatasetError : public std::runtime_error {
 public:
  DatasetError(DatasetErrc code, const std::string& detail);
  DatasetErrc code() const noexcept { return code_; }

 private:
  DatasetErrc code_;
};

inline constexpr char kDatasetMagic[8] = {'M', 'A', 'R', 'L', 'D', 'S', '1', '\0'};
inline constexpr int kDatasetFormatVersion = 1;

std::vector<std::uint8_t> encode_dataset(const TeacherDataset& dataset);
TeacherDataset decode_dataset(const std::vector<std::uint8_t>& bytes);

void save_dataset(const TeacherDataset& dataset, const std::filesystem::path& path);
TeacherDataset load_dataset(const std::filesystem::path& path);

}  // namespace marl::replay
