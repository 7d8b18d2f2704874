#include "marl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <thread>

#include "marl/errors.hpp"
#include "marl/kernels.hpp"

namespace marl::harness {

using nlohmann::json;

std::vector<ReincarnationPlan> enumerate_subsets(std::size_t n, std::optional<std::size_t> x) {
  require(n >= 1 && n < 64, "enumerate_subsets: n must lie in [1, 63]");
  if (x) require(*x <= n, "enumerate_subsets: x must not exceed n");
  std::vector<ReincarnationPlan> plans;
  const std::uint64_t end = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < end; ++mask)
    if (!x || static_cast<std::size_t>(std::popcount(mask)) == *x) plans.emplace_back(n, mask);
  return plans;
}

std::vector<ReincarnationPlan> SweepSpec::plans() const {
  const std::size_t n = base.train.env.n_agents;
  if (!base.sweep.plans.empty()) {
    std::vector<ReincarnationPlan> out;
    for (std::uint64_t mask : base.sweep.plans) out.emplace_back(n, mask);
    return out;
  }
  if (base.sweep.x >= 0) return enumerate_subsets(n, static_cast<std::size_t>(base.sweep.x));
  return enumerate_subsets(n);
}

json make_manifest(const config::ExperimentConfig& cfg, const ReincarnationPlan& plan, const std::string& run_id,
                   const learner::TrainingResult& result) {
  json reincarnated = json::array(), tabula_rasa = json::array();
  for (std::size_t i : plan.reincarnated()) reincarnated.push_back(result.agent_names[i]);
  for (std::size_t i : plan.tabula_rasa()) tabula_rasa.push_back(result.agent_names[i]);
  json reads = json::array();
  for (const auto& [agent, path] : result.dataset_reads) reads.push_back({{"agent", agent}, {"path", path}});
  return {{"run_id", run_id},
          {"seed", cfg.train.seed},
          {"plan",
           {{"n_agents", plan.n_agents()},
            {"bitmask", plan.bitmask()},
            {"x", plan.x()},
            {"reincarnated", reincarnated},
            {"tabula_rasa", tabula_rasa}}},
          {"agent_names", result.agent_names},
          {"config", config::to_json(cfg)},
          {"config_hash", config::config_hash(cfg)},
          {"dataset_hashes", result.dataset_hashes},
          {"dataset_reads", reads},
          {"dataset_quality", result.curve.dataset_quality},
          {"n_points", result.curve.points.size()},
          {"gradient_updates", result.gradient_updates},
          {"teacher_sequences_in_phase", result.teacher_sequences_in_phase},
          {"teacher_sequences_after_phase", result.teacher_sequences_after_phase},
          {"notes",
           {{"returns", "undiscounted training-episode returns, one point per completed episode"},
            {"teacher_sampling", "independent per agent: each reincarnated agent draws its own teacher episodes"},
            {"x_aggregation", "per-run: every run with x reincarnated agents counts once"}}}};
}

std::string run_one(const config::ExperimentConfig& cfg_in, const ReincarnationPlan& plan, std::uint64_t seed,
                    store::ResultsStore& store) {
  config::ExperimentConfig cfg = cfg_in;
  cfg.train.seed = seed;
  const std::string run_id = learner::default_run_id(plan, seed);
  const learner::TrainingResult result = learner::run_training(cfg.train, plan, run_id);
  store::RunRecord rec{run_id, plan, seed, result.curve, make_manifest(cfg, plan, run_id, result)};
  store.write_run(rec, result.checkpoint);
  return run_id;
}

SweepReport run_sweep(const SweepSpec& spec, store::ResultsStore& store, const SweepOptions& options) {
  const auto& seeds = spec.base.sweep.seeds;
  require(!seeds.empty(), "sweep needs at least one seed");
  {
    auto sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "sweep seeds must be distinct");
  }
  store::write_text_atomic(store.root() / "sweep.json", config::to_json(spec.base).dump(2) + "\n");

  struct Job {
    ReincarnationPlan plan;
    std::uint64_t seed;
    std::string run_id;
  };
  SweepReport report;
  std::vector<Job> pending;
  for (const ReincarnationPlan& plan : spec.plans()) {
    for (std::uint64_t seed : seeds) {
      ++report.planned;
      std::string id = learner::default_run_id(plan, seed);
      if (store.has_run(id)) {
        ++report.skipped_existing;
        continue;
      }
      pending.push_back({plan, seed, std::move(id)});
    }
  }
  if (options.max_new_runs && pending.size() > *options.max_new_runs) pending.resize(*options.max_new_runs);

  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  auto worker = [&] {
    kernels::use_single_thread();
    for (std::size_t k = next++; k < pending.size(); k = next++) {
      const Job& job = pending[k];
      bool ok = true;
      try {
        run_one(spec.base, job.plan, job.seed, store);
      } catch (const std::exception& e) {
        ok = false;
        store.write_failure(job.run_id, e.what());
      }
      {
        std::lock_guard lock(report_mutex);
        if (ok) ++report.completed;
        else report.failed.push_back(job.run_id);
      }
      if (options.on_run_finished) options.on_run_finished(job.run_id, ok);
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(spec.base.sweep.parallelism, pending.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  std::sort(report.failed.begin(), report.failed.end());
  return report;
}

double standard_error(std::span<const double> values) {
  require(values.size() >= 2, "standard error is undefined for fewer than two samples");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double n = static_cast<double>(values.size());
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

std::vector<std::uint64_t> common_grid(std::span<const ReturnCurve> curves) {
  std::uint64_t first = 0;
  std::vector<std::uint64_t> grid;
  for (const ReturnCurve& c : curves) {
    require(!c.points.empty(), "curve has no points");
    first = std::max(first, c.points.front().step);
    for (const auto& p : c.points) grid.push_back(p.step);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  grid.erase(grid.begin(), std::lower_bound(grid.begin(), grid.end(), first));
  return grid;
}

std::vector<double> resample(const ReturnCurve& curve, std::span<const std::uint64_t> grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  std::size_t k = 0;
  for (std::uint64_t g : grid) {
    while (k + 1 < curve.points.size() && curve.points[k + 1].step <= g) ++k;
    require(!curve.points.empty() && curve.points[k].step <= g, "grid step precedes the first logged point");
    out.push_back(curve.points[k].episode_return);
  }
  return out;
}

MetricValue max_return_metric(std::span<const ReturnCurve> curves, std::span<const std::uint64_t> grid_in) {
  require(curves.size() >= 2, "max return standard error is undefined for a single seed");
  const std::vector<std::uint64_t> own = grid_in.empty() ? common_grid(curves) : std::vector<std::uint64_t>{};
  const std::span<const std::uint64_t> grid = grid_in.empty() ? std::span<const std::uint64_t>(own) : grid_in;
  require(!grid.empty(), "empty evaluation grid");
  std::vector<std::vector<double>> values;
  for (const ReturnCurve& c : curves) values.push_back(resample(c, grid));

  std::size_t best = 0;
  double best_mean = -INFINITY;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double mean = 0.0;
    for (const auto& v : values) mean += v[g];
    mean /= static_cast<double>(values.size());
    if (mean > best_mean) {
      best_mean = mean;
      best = g;
    }
  }
  std::vector<double> at_best;
  for (const auto& v : values) at_best.push_back(v[best]);
  return {best_mean, standard_error(at_best), grid[best]};
}

MetricValue average_return_metric(std::span<const ReturnCurve> curves) {
  require(curves.size() >= 2, "average return standard error is undefined for a single seed");
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> seed_means;
  for (const ReturnCurve& c : curves) {
    require(!c.points.empty(), "average return over an empty curve");
    double s = 0.0;
    for (const auto& p : c.points) s += p.episode_return;
    total += s;
    count += c.points.size();
    seed_means.push_back(s / static_cast<double>(c.points.size()));
  }
  return {total / static_cast<double>(count), standard_error(seed_means), 0};
}

std::vector<MetricsSummary> summarize_plans(std::span<const store::RunRecord> runs) {
  std::map<std::uint64_t, std::vector<const store::RunRecord*>> by_plan;
  for (const auto& r : runs) by_plan[r.plan.bitmask()].push_back(&r);
  std::vector<MetricsSummary> out;
  for (const auto& [mask, group] : by_plan) {
    std::vector<ReturnCurve> curves;
    for (const auto* r : group) curves.push_back(r->curve);
    MetricsSummary s;
    s.plan = group.front()->plan;
    s.n_seeds = curves.size();
    s.n_runs = curves.size();
    s.max_return = max_return_metric(curves);
    s.avg_return = average_return_metric(curves);
    out.push_back(s);
  }
  return out;
}

std::vector<XSummary> summarize_by_x(std::span<const store::RunRecord> runs) {
  std::map<std::size_t, std::vector<const store::RunRecord*>> by_x;
  for (const auto& r : runs) by_x[r.plan.x()].push_back(&r);
  std::vector<XSummary> out;
  for (const auto& [x, group] : by_x) {
    std::vector<ReturnCurve> curves;
    std::vector<std::uint64_t> masks;
    for (const auto* r : group) {
      curves.push_back(r->curve);
      masks.push_back(r->plan.bitmask());
    }
    std::sort(masks.begin(), masks.end());
    XSummary s;
    s.x = x;
    s.n_runs = curves.size();
    s.n_plans = static_cast<std::size_t>(std::unique(masks.begin(), masks.end()) - masks.begin());
    s.max_return = max_return_metric(curves);
    s.avg_return = average_return_metric(curves);
    out.push_back(s);
  }
  return out;
}

Ranking rank_plans(std::span<const MetricsSummary> summaries, std::size_t n_agents, std::size_t x) {
  Ranking ranking;
  std::vector<std::uint64_t> missing;
  for (const ReincarnationPlan& plan : enumerate_subsets(n_agents, x)) {
    const auto it = std::find_if(summaries.begin(), summaries.end(),
                                 [&](const MetricsSummary& s) { return s.plan == plan; });
    if (it == summaries.end()) missing.push_back(plan.bitmask());
    else ranking.ordered.push_back(*it);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::uint64_t m : missing) list += (list.empty() ? "" : ", ") + std::to_string(m);
    throw IncompleteStore("store is missing plans with bitmask " + list, std::move(missing));
  }
  std::sort(ranking.ordered.begin(), ranking.ordered.end(), [](const MetricsSummary& a, const MetricsSummary& b) {
    if (a.avg_return.value != b.avg_return.value) return a.avg_return.value > b.avg_return.value;
    return a.plan.bitmask() < b.plan.bitmask();
  });
  return ranking;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string metrics_csv(std::span<const MetricsSummary> summaries) {
  std::string out = "plan_bitmask,x,max_return,max_return_se,avg_return,avg_return_se,n_seeds\n";
  for (const MetricsSummary& s : summaries) {
    out += std::to_string(s.plan.bitmask()) + "," + std::to_string(s.plan.x()) + "," + num(s.max_return.value) + "," +
           num(s.max_return.standard_error) + "," + num(s.avg_return.value) + "," + num(s.avg_return.standard_error) +
           "," + std::to_string(s.n_seeds) + "\n";
  }
  return out;
}

std::string metrics_by_x_csv(std::span<const XSummary> summaries) {
  std::string out = "x,max_return,max_return_se,avg_return,avg_return_se,n_plans,n_runs\n";
  for (const XSummary& s : summaries) {
    out += std::to_string(s.x) + "," + num(s.max_return.value) + "," + num(s.max_return.standard_error) + "," +
           num(s.avg_return.value) + "," + num(s.avg_return.standard_error) + "," + std::to_string(s.n_plans) + "," +
           std::to_string(s.n_runs) + "\n";
  }
  return out;
}

}  // namespace marl::harness
