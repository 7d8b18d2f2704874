#include "marl/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "marl/errors.hpp"

namespace marl::replay {

const char* to_string(DatasetErrc code) {
  switch (code) {
    case DatasetErrc::io: return "io error";
    case DatasetErrc::bad_magic: return "bad magic";
    case DatasetErrc::truncated: return "truncated file";
    case DatasetErrc::bad_header: return "bad header";
    case DatasetErrc::agent_count_mismatch: return "agent count mismatch";
    case DatasetErrc::dimension_mismatch: return "dimension mismatch";
    case DatasetErrc::invalid_value: return "invalid value";
    case DatasetErrc::trailing_data: return "trailing data";
  }
  return "unknown";
}

DatasetError::DatasetError(DatasetErrc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail)), code_(code) {}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

template <typename T>
void put_array(std::vector<std::uint8_t>& out, const std::vector<T>& values) {
  put_u32(out, static_cast<std::uint32_t>(values.size()));
  for (T v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint32_t u32() {
    if (remaining() < 4) throw DatasetError(DatasetErrc::truncated, "unexpected end of file");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * k);
    return v;
  }

  std::vector<float> floats(std::uint32_t count) {
    if (remaining() / 4 < count) throw DatasetError(DatasetErrc::truncated, "array runs past end of file");
    std::vector<float> out(count);
    for (float& f : out) f = std::bit_cast<float>(u32());
    return out;
  }

  void skip(std::size_t n) {
    if (remaining() < n) throw DatasetError(DatasetErrc::truncated, "unexpected end of file");
    pos_ += n;
  }

  std::size_t position() const { return pos_; }
  void seek(std::size_t pos) { pos_ = pos; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

nlohmann::json header_json(const TeacherDataset& d) {
  return {{"format_version", kDatasetFormatVersion},
          {"env_id", d.spec.env_id},
          {"n_agents", d.spec.n_agents},
          {"obs_dims", d.spec.obs_dims},
          {"act_dims", d.spec.act_dims},
          {"episode_length", d.spec.episode_length},
          {"agent_names", d.spec.agent_names},
          {"quality_tag", d.quality_tag},
          {"source_run_id", d.source_run_id},
          {"episode_count", d.episode_count()}};
}

template <typename T>
T header_field(const nlohmann::json& h, const char* key) {
  if (!h.contains(key)) throw DatasetError(DatasetErrc::bad_header, std::string("missing field ") + key);
  try {
    return h.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DatasetError(DatasetErrc::bad_header, std::string("field has the wrong type: ") + key);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const TeacherDataset& dataset) {
  dataset.validate();
  const std::string header = header_json(dataset).dump();
  std::vector<std::uint8_t> out(std::begin(kDatasetMagic), std::end(kDatasetMagic));
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (std::size_t e = 0; e < dataset.episode_count(); ++e) {
    for (std::size_t a = 0; a < dataset.spec.n_agents; ++a) {
      const EpisodeSequence& ep = dataset.episodes[a][e];
      put_array(out, ep.observations);
      put_array(out, ep.actions);
      put_array(out, ep.rewards);
      put_array(out, ep.dones);
    }
  }
  return out;
}

TeacherDataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  const std::size_t magic_len = sizeof(kDatasetMagic);
  const std::size_t probe = std::min(bytes.size(), magic_len);
  if (probe > 0 && std::memcmp(bytes.data(), kDatasetMagic, probe) != 0)
    throw DatasetError(DatasetErrc::bad_magic, "not a dataset file");
  if (bytes.size() < magic_len) throw DatasetError(DatasetErrc::truncated, "file shorter than magic");

  Reader in(bytes);
  in.skip(magic_len);
  const std::uint32_t header_len = in.u32();
  if (in.remaining() < header_len) throw DatasetError(DatasetErrc::truncated, "header runs past end of file");
  const std::string header_text(bytes.begin() + static_cast<std::ptrdiff_t>(in.position()),
                                bytes.begin() + static_cast<std::ptrdiff_t>(in.position() + header_len));
  in.skip(header_len);

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(DatasetErrc::bad_header, e.what());
  }
  if (!h.is_object()) throw DatasetError(DatasetErrc::bad_header, "header is not an object");
  if (header_field<int>(h, "format_version") != kDatasetFormatVersion)
    throw DatasetError(DatasetErrc::bad_header, "unsupported format_version");

  const auto env_id = header_field<std::string>(h, "env_id");
  const auto n_agents = header_field<std::size_t>(h, "n_agents");
  const auto obs_dims = header_field<std::vector<std::size_t>>(h, "obs_dims");
  const auto act_dims = header_field<std::vector<std::size_t>>(h, "act_dims");
  const auto episode_length = header_field<std::size_t>(h, "episode_length");
  const auto episode_count = header_field<std::size_t>(h, "episode_count");

  if (obs_dims.size() != n_agents || act_dims.size() != n_agents)
    throw DatasetError(DatasetErrc::agent_count_mismatch, "per-agent dimension lists disagree with n_agents");

  TeacherDataset d;
  try {
    d.spec = env::make_environment(env_id, n_agents, episode_length)->spec();
  } catch (const std::exception& e) {
    throw DatasetError(DatasetErrc::bad_header, e.what());
  }
  if (d.spec.obs_dims != obs_dims || d.spec.act_dims != act_dims)
    throw DatasetError(DatasetErrc::dimension_mismatch, "header dimensions disagree with environment " + env_id);
  if (h.contains("agent_names")) {
    auto names = header_field<std::vector<std::string>>(h, "agent_names");
    if (names.size() != n_agents)
      throw DatasetError(DatasetErrc::agent_count_mismatch, "agent_names disagree with n_agents");
    auto sorted_names = names, expected_names = d.spec.agent_names;
    std::sort(sorted_names.begin(), sorted_names.end());
    std::sort(expected_names.begin(), expected_names.end());
    if (sorted_names != expected_names)
      throw DatasetError(DatasetErrc::bad_header, "agent_names do not match environment " + env_id);
    d.spec.agent_names = std::move(names);
  }
  d.quality_tag = header_field<std::string>(h, "quality_tag");
  d.source_run_id = header_field<std::string>(h, "source_run_id");

  // Count arrays before decoding so a body written for a different number of
  // agents is reported as such rather than as a misaligned read.
  const std::size_t body_start = in.position();
  std::size_t arrays = 0;
  bool ragged = false;  // the body ends inside an array
  while (in.remaining() > 0) {
    if (in.remaining() < 4) {
      ragged = true;
      break;
    }
    const std::uint32_t count = in.u32();
    if (in.remaining() / 4 < count) {
      ragged = true;
      break;
    }
    in.skip(std::size_t{count} * 4);
    ++arrays;
  }
  const std::size_t expected = episode_count * n_agents * 4;
  if (arrays >= expected && ragged) throw DatasetError(DatasetErrc::trailing_data, "bytes after the last declared array");
  if (arrays != expected || ragged) {
    if (!ragged && episode_count > 0 && arrays % (episode_count * 4) == 0)
      throw DatasetError(DatasetErrc::agent_count_mismatch, "header declares " + std::to_string(n_agents) +
                                                                " agents, body holds " +
                                                                std::to_string(arrays / (episode_count * 4)));
    if (arrays < expected) throw DatasetError(DatasetErrc::truncated, "body holds fewer arrays than declared");
    throw DatasetError(DatasetErrc::trailing_data, "body holds more arrays than declared");
  }
  in.seek(body_start);

  d.episodes.assign(n_agents, {});
  for (auto& list : d.episodes) list.reserve(episode_count);
  const std::size_t T = episode_length;
  auto expect = [](std::uint32_t got, std::size_t want, const char* what) {
    if (got != want)
      throw DatasetError(DatasetErrc::dimension_mismatch,
                         std::string(what) + " has " + std::to_string(got) + " values, expected " + std::to_string(want));
  };
  for (std::size_t e = 0; e < episode_count; ++e) {
    for (std::size_t a = 0; a < n_agents; ++a) {
      EpisodeSequence ep;
      ep.agent_id = a;
      ep.obs_dim = obs_dims[a];
      ep.act_dim = act_dims[a];
      ep.source = Source::teacher;
      std::uint32_t n = in.u32();
      expect(n, (T + 1) * obs_dims[a], "observations");
      ep.observations = in.floats(n);
      n = in.u32();
      expect(n, T * act_dims[a], "actions");
      ep.actions = in.floats(n);
      n = in.u32();
      expect(n, T, "rewards");
      ep.rewards = in.floats(n);
      n = in.u32();
      expect(n, T, "dones");
      for (float f : in.floats(n)) {
        if (f != 0.0f && f != 1.0f) throw DatasetError(DatasetErrc::invalid_value, "done flag is not 0 or 1");
        ep.dones.push_back(f == 1.0f ? 1 : 0);
      }
      try {
        ep.validate(true);
      } catch (const ContractViolation& err) {
        throw DatasetError(DatasetErrc::invalid_value, err.what());
      }
      d.episodes[a].push_back(std::move(ep));
    }
  }
  return d;
}

void save_dataset(const TeacherDataset& dataset, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = encode_dataset(dataset);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError(DatasetErrc::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DatasetError(DatasetErrc::io, "write failed for " + path.string());
}

TeacherDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(DatasetErrc::io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_dataset(bytes);
}

}  // namespace marl::replay
