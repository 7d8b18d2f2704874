#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marl/config.hpp"
#include "marl/learner.hpp"
#include "marl/store.hpp"

namespace marl::harness {

using learner::ReincarnationPlan;
using learner::ReturnCurve;

// All 2^n plans in ascending bitmask order, or only the C(n, x) plans with
// exactly x reincarnated agents.
std::vector<ReincarnationPlan> enumerate_subsets(std::size_t n, std::optional<std::size_t> x = std::nullopt);

struct SweepSpec {
  config::ExperimentConfig base;  // train.seed is replaced per run

  // Plans selected by base.sweep (explicit plans, else x filter, else all).
  std::vector<ReincarnationPlan> plans() const;
};

struct SweepOptions {
  // Stop after this many new runs (simulates an interrupted sweep).
  std::optional<std::size_t> max_new_runs;
  std::function<void(const std::string& run_id, bool ok)> on_run_finished;
};

struct SweepReport {
  std::size_t planned = 0;
  std::size_t skipped_existing = 0;
  std::size_t completed = 0;
  std::vector<std::string> failed;
};

// Runs every (plan, seed) pair not yet in the store. A failed run is recorded
// under failures/ and the sweep continues.
SweepReport run_sweep(const SweepSpec& spec, store::ResultsStore& store, const SweepOptions& options = {});

// Runs one (plan, seed) and writes it to the store; returns the run id.
std::string run_one(const config::ExperimentConfig& cfg, const ReincarnationPlan& plan, std::uint64_t seed,
                    store::ResultsStore& store);

nlohmann::json make_manifest(const config::ExperimentConfig& cfg, const ReincarnationPlan& plan,
                             const std::string& run_id, const learner::TrainingResult& result);

struct MetricValue {
  double value = 0.0;
  double standard_error = 0.0;
  std::uint64_t best_step = 0;  // max-return only: step where the cross-seed mean peaks
};

// Sorted union of logged steps, starting at the first step every curve covers.
std::vector<std::uint64_t> common_grid(std::span<const ReturnCurve> curves);

// Value of the latest point at or before each grid step.
std::vector<double> resample(const ReturnCurve& curve, std::span<const std::uint64_t> grid);

// Cross-seed mean at the step where it is highest (earliest on ties), with
// standard error = sample std across seeds / sqrt(n) at that step.
MetricValue max_return_metric(std::span<const ReturnCurve> curves, std::span<const std::uint64_t> grid = {});

// Mean over every logged point of every seed; SE from per-seed means.
MetricValue average_return_metric(std::span<const ReturnCurve> curves);

// Sample (n - 1) standard deviation over sqrt(n).
double standard_error(std::span<const double> values);

struct MetricsSummary {
  ReincarnationPlan plan;
  MetricValue max_return;
  MetricValue avg_return;
  std::size_t n_seeds = 0;
  std::size_t n_runs = 0;
};

// One summary per plan present in `runs`, in ascending bitmask order.
std::vector<MetricsSummary> summarize_plans(std::span<const store::RunRecord> runs);

struct XSummary {
  std::size_t x = 0;
  MetricValue max_return;
  MetricValue avg_return;
  std::size_t n_plans = 0;
  std::size_t n_runs = 0;
};

// Pools every run with x reincarnated agents, each run counting once.
std::vector<XSummary> summarize_by_x(std::span<const store::RunRecord> runs);

class IncompleteStore : public std::runtime_error {
 public:
  IncompleteStore(const std::string& message, std::vector<std::uint64_t> missing)
      : std::runtime_error(message), missing_(std::move(missing)) {}
  const std::vector<std::uint64_t>& missing() const { return missing_; }

 private:
  std::vector<std::uint64_t> missing_;
};

struct Ranking {
  std::vector<MetricsSummary> ordered;  // best first
  const MetricsSummary& best() const { return ordered.front(); }
  const MetricsSummary& worst() const { return ordered.back(); }
};

// Plans with x reincarnated agents ranked by average return, ties broken by
// ascending bitmask. Throws IncompleteStore listing absent plans.
Ranking rank_plans(std::span<const MetricsSummary> summaries, std::size_t n_agents, std::size_t x);

std::string metrics_csv(std::span<const MetricsSummary> summaries);
std::string metrics_by_x_csv(std::span<const XSummary> summaries);

}  // namespace marl::harness
