#include "marl/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "marl/config.hpp"
#include "marl/dataset_io.hpp"
#include "marl/env.hpp"
#include "marl/errors.hpp"
#include "marl/evalstats.hpp"
#include "marl/harness.hpp"
#include "marl/learner.hpp"
#include "marl/replay.hpp"
#include "marl/store.hpp"
#include "marl/svg.hpp"

namespace marl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kFinalWindow = 0.05;
constexpr std::size_t kProfilePoints = 51;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string store;
};

config::ExperimentConfig load(const Common& c) {
  if (c.config_path.empty()) throw ConfigError("missing --config");
  return config::load_config(c.config_path, c.overrides);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> names_for(const config::ExperimentConfig& cfg) {
  const auto& e = cfg.train.env;
  return env::make_environment(e.id, e.n_agents, e.episode_length, e.agent_order)->spec().agent_names;
}

learner::ReincarnationPlan parse_plan(const std::string& text, const std::vector<std::string>& names) {
  const bool numeric = !text.empty() && std::all_of(text.begin(), text.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
  if (numeric) return {names.size(), std::stoull(text)};
  std::string body = text;
  if (!body.empty() && body.front() == '{') body.erase(body.begin());
  if (!body.empty() && body.back() == '}') body.pop_back();
  std::vector<std::string> picked;
  std::stringstream ss(body);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) picked.push_back(item);
  return learner::ReincarnationPlan::from_names(names, picked);
}

int cmd_train_teacher(const Common& c, const std::string& output, std::ostream& out) {
  config::ExperimentConfig cfg = load(c);
  cfg.train.log_experience = true;
  const auto plan = learner::ReincarnationPlan::tabula_rasa_plan(cfg.train.env.n_agents);
  const std::string run_id = "teacher_s" + std::to_string(cfg.train.seed);
  const learner::TrainingResult result = learner::run_training(cfg.train, plan, run_id);
  const fs::path path = output.empty() ? fs::path(resolve_store_root(c.store)) / "teacher" / "experience.mds" : fs::path(output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  replay::save_dataset(*result.experience_log, path);
  store::write_text_atomic(fs::path(path.string() + ".curve.jsonl"), store::curve_to_jsonl(run_id, result.curve));
  out << "teacher " << run_id << ": " << result.experience_log->episode_count() << " episodes, final return "
      << evalstats::final_performance(result.curve, kFinalWindow) << ", log written to " << path.string() << "\n";
  return kOk;
}

int cmd_make_dataset(const std::string& input, double fraction, const std::string& output, std::ostream& out) {
  const replay::TeacherDataset log = replay::load_dataset(input);
  const replay::TeacherDataset slice = replay::slice_by_quality(log, fraction);
  const fs::path path(output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  replay::save_dataset(slice, path);
  out << "dataset " << path.string() << ": " << slice.episode_count() << " of " << log.episode_count()
      << " episodes, quality \"" << slice.quality_tag << "\"\n";
  return kOk;
}

int cmd_sweep(const Common& c, std::optional<std::size_t> max_runs, std::ostream& out) {
  const config::ExperimentConfig cfg = load(c);
  cfg.train.validate();
  store::ResultsStore rs(resolve_store_root(c.store));
  harness::SweepOptions opts;
  opts.max_new_runs = max_runs;
  std::mutex io;
  opts.on_run_finished = [&](const std::string& run_id, bool ok) {
    std::lock_guard lock(io);
    out << (ok ? "done   " : "failed ") << run_id << "\n" << std::flush;
  };
  const harness::SweepReport report = harness::run_sweep(harness::SweepSpec{cfg}, rs, opts);
  out << "sweep: " << report.planned << " planned, " << report.skipped_existing << " already stored, "
      << report.completed << " completed, " << report.failed.size() << " failed\n";
  if (!report.failed.empty()) throw std::runtime_error("runs failed: see " + (rs.root() / "failures").string());
  return kOk;
}

int cmd_train(const Common& c, const std::string& plan_text, std::optional<std::uint64_t> seed, std::ostream& out) {
  const config::ExperimentConfig cfg = load(c);
  cfg.train.validate();
  const learner::ReincarnationPlan plan = parse_plan(plan_text, names_for(cfg));
  store::ResultsStore rs(resolve_store_root(c.store));
  const std::string run_id = harness::run_one(cfg, plan, seed.value_or(cfg.train.seed), rs);
  out << "run " << run_id << " written to " << rs.manifest_path(run_id).string() << "\n";
  return kOk;
}

std::vector<store::RunRecord> require_runs(const store::ResultsStore& rs) {
  std::vector<store::RunRecord> runs = rs.load_runs();
  if (runs.empty()) throw std::runtime_error("no runs found in " + rs.root().string());
  return runs;
}

struct Groups {
  std::map<std::size_t, evalstats::ScoreSet> by_x;
  std::vector<double> all;
};

Groups final_scores(const std::vector<store::RunRecord>& runs) {
  Groups g;
  for (const auto& r : runs) {
    const double s = evalstats::final_performance(r.curve, kFinalWindow);
    auto& set = g.by_x[r.plan.x()];
    set.label = "x=" + std::to_string(r.plan.x());
    set.scores.push_back(s);
    g.all.push_back(s);
  }
  return g;
}

std::vector<double> thresholds_for(const std::vector<double>& all) {
  const auto [lo, hi] = std::minmax_element(all.begin(), all.end());
  std::vector<double> t(kProfilePoints);
  for (std::size_t i = 0; i < kProfilePoints; ++i)
    t[i] = *lo + (*hi - *lo) * static_cast<double>(i) / static_cast<double>(kProfilePoints - 1);
  return t;
}

int cmd_metrics(const Common& c, std::optional<double> ceiling_flag, std::ostream& out) {
  store::ResultsStore rs(resolve_store_root(c.store));
  const std::vector<store::RunRecord> runs = require_runs(rs);
  const auto plans = harness::summarize_plans(runs);
  const auto by_x = harness::summarize_by_x(runs);
  store::write_text_atomic(rs.root() / "metrics.csv", harness::metrics_csv(plans));
  store::write_text_atomic(rs.root() / "metrics_by_x.csv", harness::metrics_by_x_csv(by_x));

  const fs::path dir = rs.root() / "evalstats";
  fs::create_directories(dir);
  std::string scores_csv = "run_id,plan_bitmask,x,seed,final_return\n";
  for (const auto& r : runs)
    scores_csv += r.run_id + "," + std::to_string(r.plan.bitmask()) + "," + std::to_string(r.plan.x()) + "," +
                  std::to_string(r.seed) + "," + fmt(evalstats::final_performance(r.curve, kFinalWindow)) + "\n";
  store::write_text_atomic(dir / "final_scores.csv", scores_csv);

  const Groups g = final_scores(runs);
  const double ceiling = ceiling_flag.value_or(*std::max_element(g.all.begin(), g.all.end()));
  const evalstats::BootstrapOptions opts;
  const std::vector<double> thresholds = thresholds_for(g.all);

  std::string profile_csv = "group,threshold,fraction_above\n";
  std::string aggregate_csv = "group,statistic,value,ci_low,ci_high\n";
  for (const auto& [x, set] : g.by_x) {
    const auto profile = evalstats::performance_profile(set.scores, thresholds);
    for (std::size_t i = 0; i < thresholds.size(); ++i)
      profile_csv += set.label + "," + fmt(thresholds[i]) + "," + fmt(profile[i]) + "\n";
    const auto agg = evalstats::aggregate_scores(set, ceiling, opts);
    const std::pair<const char*, const evalstats::Estimate*> rows[] = {
        {"mean", &agg.mean}, {"median", &agg.median}, {"iqm", &agg.iqm}, {"optimality_gap", &agg.optimality_gap}};
    for (const auto& [name, est] : rows)
      aggregate_csv += set.label + "," + name + "," + fmt(est->value) + "," + fmt(est->ci.low) + "," + fmt(est->ci.high) + "\n";
  }
  store::write_text_atomic(dir / "profiles.csv", profile_csv);
  store::write_text_atomic(dir / "aggregates.csv", aggregate_csv);

  std::string poi_csv = "a,b,probability,ci_low,ci_high\n";
  if (auto base = g.by_x.find(0); base != g.by_x.end()) {
    for (const auto& [x, set] : g.by_x) {
      if (x == 0) continue;
      const auto est = evalstats::probability_of_improvement_ci(set, base->second, opts);
      poi_csv += set.label + "," + base->second.label + "," + fmt(est.value) + "," + fmt(est.ci.low) + "," +
                 fmt(est.ci.high) + "\n";
    }
  }
  store::write_text_atomic(dir / "improvement.csv", poi_csv);

  const json meta = {{"final_window_fraction", kFinalWindow},
                     {"final_window", "mean return over the last 5% of logged points per run (at least one point)"},
                     {"bootstrap", {{"resamples", opts.resamples}, {"seed", opts.seed}, {"confidence", opts.confidence}}},
                     {"optimality_gap_ceiling", ceiling},
                     {"n_runs", runs.size()}};
  store::write_text_atomic(dir / "metadata.json", meta.dump(2) + "\n");

  const std::size_t n = runs.front().plan.n_agents();
  const std::vector<std::string> names = runs.front().manifest.value("agent_names", std::vector<std::string>{});
  for (std::size_t x = 1; x < n; ++x) {
    try {
      const harness::Ranking ranking = harness::rank_plans(plans, n, x);
      out << "x=" << x << " best " << ranking.best().plan.label(names) << " worst " << ranking.worst().plan.label(names)
          << "\n";
    } catch (const harness::IncompleteStore&) {
    }
  }
  out << "metrics: " << plans.size() << " plans, " << runs.size() << " runs; wrote "
      << (rs.root() / "metrics.csv").string() << "\n";
  return kOk;
}

// Cross-seed mean and standard error of a set of curves on their common grid.
plot::Series mean_series(const std::string& label, std::span<const learner::ReturnCurve> curves) {
  plot::Series s;
  s.label = label;
  const auto grid = harness::common_grid(curves);
  std::vector<std::vector<double>> columns;
  for (const auto& c : curves) columns.push_back(harness::resample(c, grid));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<double> at;
    for (const auto& col : columns) at.push_back(col[i]);
    const double m = evalstats::mean(at);
    const double se = at.size() >= 2 ? harness::standard_error(at) : 0.0;
    s.x.push_back(static_cast<double>(grid[i]));
    s.y.push_back(m);
    s.lower.push_back(m - se);
    s.upper.push_back(m + se);
  }
  return s;
}

int cmd_plot(const Common& c, std::ostream& out) {
  store::ResultsStore rs(resolve_store_root(c.store));
  const std::vector<store::RunRecord> runs = require_runs(rs);
  const fs::path dir = rs.root() / "plots";
  fs::create_directories(dir);
  const std::vector<std::string> names = runs.front().manifest.value("agent_names", std::vector<std::string>{});

  std::map<std::size_t, std::vector<learner::ReturnCurve>> by_x;
  std::map<std::uint64_t, std::vector<learner::ReturnCurve>> by_plan;
  std::map<std::uint64_t, learner::ReincarnationPlan> plan_of;
  for (const auto& r : runs) {
    by_x[r.plan.x()].push_back(r.curve);
    by_plan[r.plan.bitmask()].push_back(r.curve);
    plan_of[r.plan.bitmask()] = r.plan;
  }

  std::vector<plot::Series> xs;
  for (const auto& [x, curves] : by_x) xs.push_back(mean_series("x=" + std::to_string(x), curves));
  store::write_text_atomic(dir / "curves_by_x.svg",
                           plot::line_chart({"Return by number of reincarnated agents", "environment step", "episode return"}, xs));

  std::vector<plot::Series> ps;
  for (const auto& [mask, curves] : by_plan) ps.push_back(mean_series(plan_of[mask].label(names), curves));
  store::write_text_atomic(dir / "curves_by_plan.svg",
                           plot::line_chart({"Return by reincarnation plan", "environment step", "episode return"}, ps));

  const Groups g = final_scores(runs);
  const std::vector<double> thresholds = thresholds_for(g.all);
  std::vector<plot::Series> profiles;
  std::vector<plot::IntervalRow> iqm_rows;
  const double ceiling = *std::max_element(g.all.begin(), g.all.end());
  for (const auto& [x, set] : g.by_x) {
    plot::Series s;
    s.label = set.label;
    s.x = thresholds;
    s.y = evalstats::performance_profile(set.scores, thresholds);
    profiles.push_back(std::move(s));
    const auto agg = evalstats::aggregate_scores(set, ceiling);
    iqm_rows.push_back({set.label, agg.iqm.value, agg.iqm.ci.low, agg.iqm.ci.high});
  }
  store::write_text_atomic(dir / "performance_profile.svg",
                           plot::line_chart({"Performance profile of final return", "return threshold", "fraction of runs above"},
                                            profiles));
  store::write_text_atomic(dir / "iqm_intervals.svg",
                           plot::interval_chart({"Interquartile mean of final return (95% CI)", "final return", ""}, iqm_rows));
  out << "plots written to " << dir.string() << "\n";
  return kOk;
}

}  // namespace

std::string resolve_store_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("MARL_STORE_ROOT"); env != nullptr && *env != '\0') return env;
  return "results";
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Selective reincarnation experiments for multi-agent continuous control", "marl"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool with_config) {
    if (with_config) {
      sub->add_option("--config", common.config_path, "experiment config (JSON)");
      sub->add_option("--set", common.overrides, "override a config key, e.g. train.gamma=0.95");
    }
    sub->add_option("--store", common.store, "results store root (default $MARL_STORE_ROOT or ./results)");
  };

  std::string teacher_output;
  auto* teacher = app.add_subcommand("train-teacher", "train all agents from scratch and log every episode");
  add_common(teacher, true);
  teacher->add_option("--output", teacher_output, "experience log path");

  std::string ds_input, ds_output;
  double fraction = 0.2;
  auto* make_ds = app.add_subcommand("make-dataset", "keep the trailing fraction of an experience log");
  make_ds->add_option("--input", ds_input, "experience log")->required();
  make_ds->add_option("--fraction", fraction, "trailing fraction of episodes to keep")->required();
  make_ds->add_option("--output", ds_output, "dataset path")->required();

  std::optional<std::size_t> max_runs;
  auto* sweep = app.add_subcommand("sweep", "run every (plan, seed) pair missing from the store");
  add_common(sweep, true);
  sweep->add_option("--max-runs", max_runs, "stop after this many new runs");

  std::string plan_text;
  std::optional<std::uint64_t> seed;
  auto* train = app.add_subcommand("train", "run one plan with one seed");
  add_common(train, true);
  train->add_option("--plan", plan_text, "bitmask or comma-separated agent names")->required();
  train->add_option("--seed", seed, "seed (default train.seed)");

  std::optional<double> ceiling;
  auto* metrics = app.add_subcommand("metrics", "write metrics.csv, metrics_by_x.csv and evalstats tables");
  add_common(metrics, false);
  metrics->add_option("--ceiling", ceiling, "optimality-gap ceiling (default: best final return)");

  auto* plot_cmd = app.add_subcommand("plot", "write SVG curves, profiles and intervals");
  add_common(plot_cmd, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigFailure;
  }

  try {
    if (teacher->parsed()) return cmd_train_teacher(common, teacher_output, out);
    if (make_ds->parsed()) return cmd_make_dataset(ds_input, fraction, ds_output, out);
    if (sweep->parsed()) return cmd_sweep(common, max_runs, out);
    if (train->parsed()) return cmd_train(common, plan_text, seed, out);
    if (metrics->parsed()) return cmd_metrics(common, ceiling, out);
    if (plot_cmd->parsed()) return cmd_plot(common, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what();
    if (!e.key().empty()) err << " (key: " << e.key() << ")";
    err << "\n";
    return kConfigFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kConfigFailure;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace marl::cli
