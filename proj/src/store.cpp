#include "marl/store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "marl/errors.hpp"

namespace marl::store {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string curve_to_jsonl(const std::string& run_id, const learner::ReturnCurve& curve) {
  std::string out;
  for (const learner::CurvePoint& p : curve.points)
    out += json{{"run_id", run_id}, {"step", p.step}, {"return", p.episode_return}}.dump() + "\n";
  return out;
}

learner::ReturnCurve read_curve_jsonl(const fs::path& path) {
  learner::ReturnCurve curve;
  std::istringstream in(read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    curve.points.push_back({rec.at("step").get<std::uint64_t>(), rec.at("return").get<double>()});
  }
  return curve;
}

ResultsStore::ResultsStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "runs");
  fs::create_directories(root_ / "curves");
}

fs::path ResultsStore::manifest_path(const std::string& run_id) const { return root_ / "runs" / run_id / "manifest.json"; }

fs::path ResultsStore::curve_path(const std::string& run_id) const { return root_ / "curves" / (run_id + ".jsonl"); }

bool ResultsStore::has_run(const std::string& run_id) const { return fs::exists(manifest_path(run_id)); }

void ResultsStore::write_run(const RunRecord& record, const json& checkpoint) {
  std::lock_guard lock(write_mutex_);
  write_text_atomic(curve_path(record.run_id), curve_to_jsonl(record.run_id, record.curve));
  if (!checkpoint.is_null())
    write_text_atomic(root_ / "checkpoints" / (record.run_id + ".json"), checkpoint.dump());
  write_text_atomic(manifest_path(record.run_id), record.manifest.dump(2) + "\n");
  const fs::path failure = root_ / "failures" / (record.run_id + ".json");
  if (fs::exists(failure)) fs::remove(failure);
}

void ResultsStore::write_failure(const std::string& run_id, const std::string& message) {
  std::lock_guard lock(write_mutex_);
  write_text_atomic(root_ / "failures" / (run_id + ".json"), json{{"run_id", run_id}, {"error", message}}.dump(2) + "\n");
}

void ResultsStore::clear_failure(const std::string& run_id) {
  std::lock_guard lock(write_mutex_);
  fs::remove(root_ / "failures" / (run_id + ".json"));
}

std::vector<std::string> ResultsStore::failures() const {
  std::vector<std::string> out;
  const fs::path dir = root_ / "failures";
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".json") out.push_back(entry.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<RunRecord> ResultsStore::load_runs() const {
  std::vector<RunRecord> runs;
  const fs::path dir = root_ / "runs";
  if (!fs::exists(dir)) return runs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path manifest = entry.path() / "manifest.json";
    if (!fs::exists(manifest)) continue;
    RunRecord rec;
    rec.manifest = json::parse(read_text(manifest));
    rec.run_id = rec.manifest.at("run_id").get<std::string>();
    rec.seed = rec.manifest.at("seed").get<std::uint64_t>();
    rec.plan = learner::ReincarnationPlan(rec.manifest.at("plan").at("n_agents").get<std::size_t>(),
                                          rec.manifest.at("plan").at("bitmask").get<std::uint64_t>());
    rec.curve = read_curve_jsonl(curve_path(rec.run_id));
    rec.curve.plan_bitmask = rec.plan.bitmask();
    rec.curve.seed = rec.seed;
    rec.curve.dataset_quality = rec.manifest.value("dataset_quality", "");
    runs.push_back(std::move(rec));
  }
  std::sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) { return a.run_id < b.run_id; });
  return runs;
}

}  // namespace marl::store
