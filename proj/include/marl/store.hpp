#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "marl/learner.hpp"

// Results store layout, one directory per sweep:
//   runs/<run_id>/manifest.json   provenance; written last, marks completion
//   curves/<run_id>.jsonl         {"run_id", "step", "return"} per episode
//   failures/<run_id>.json        error of a failed run
//   checkpoints/<run_id>.json     optional network weights
//   metrics.csv, metrics_by_x.csv written by the metrics step
namespace marl::store {

struct RunRecord {
  std::string run_id;
  learner::ReincarnationPlan plan;
  std::uint64_t seed = 0;
  learner::ReturnCurve curve;
  nlohmann::json manifest;
};

class ResultsStore {
 public:
  explicit ResultsStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path manifest_path(const std::string& run_id) const;
  std::filesystem::path curve_path(const std::string& run_id) const;

  bool has_run(const std::string& run_id) const;
  // Thread-safe. The curve is written before the manifest, and the manifest
  // is renamed into place, so a run is either complete or absent.
  void write_run(const RunRecord& record, const nlohmann::json& checkpoint = nullptr);
  void write_failure(const std::string& run_id, const std::string& message);
  void clear_failure(const std::string& run_id);
  std::vector<std::string> failures() const;

  // Every completed run, sorted by run_id.
  std::vector<RunRecord> load_runs() const;

 private:
  std::filesystem::path root_;
  mutable std::mutex write_mutex_;
};

void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

learner::ReturnCurve read_curve_jsonl(const std::filesystem::path& path);
std::string curve_to_jsonl(const std::string& run_id, const learner::ReturnCurve& curve);

}  // namespace marl::store
