#include <doctest.h>

#include <filesystem>
#include <map>

#include "marl/dataset_io.hpp"
#include "marl/errors.hpp"
#include "marl/harness.hpp"
#include "support.hpp"

using namespace marl;
using namespace marl::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

config::ExperimentConfig tiny_experiment(const fs::path& teacher) {
  config::ExperimentConfig cfg;
  auto& t = cfg.train;
  t.env.n_agents = 2;
  t.env.episode_length = 10;
  t.total_env_steps = 120;
  t.teacher_phase_steps = 100;
  t.warmup_steps = 60;
  t.train_every = 4;
  t.gru_hidden = 4;
  t.dense = 4;
  t.batch_size = 4;
  t.window = 3;
  t.teacher_dataset = teacher.string();
  cfg.sweep.seeds = {0, 1};
  return cfg;
}

fs::path tiny_teacher(const fs::path& dir) {
  config::ExperimentConfig cfg = tiny_experiment({});
  cfg.train.log_experience = true;
  const auto r = learner::run_training(cfg.train, ReincarnationPlan::tabula_rasa_plan(2), "teacher");
  const fs::path path = dir / "teacher.mds";
  replay::save_dataset(*r.experience_log, path);
  return path;
}

// Every file under root, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file()) files[fs::relative(entry.path(), root).string()] = store::read_text(entry.path());
  return files;
}

store::RunRecord record(std::uint64_t mask, std::uint64_t seed, std::vector<double> returns, std::size_t n = 2) {
  store::RunRecord r;
  r.plan = ReincarnationPlan(n, mask);
  r.seed = seed;
  r.run_id = learner::default_run_id(r.plan, seed);
  std::uint64_t step = 10;
  for (double v : returns) r.curve.points.push_back({step, v}), step += 10;
  r.curve.plan_bitmask = mask;
  r.curve.seed = seed;
  return r;
}

}  // namespace

TEST_CASE("subset enumeration examples") {
  CHECK(enumerate_subsets(6).size() == 64);
  CHECK(enumerate_subsets(6, 3).size() == 20);
  const auto one = enumerate_subsets(1);
  REQUIRE(one.size() == 2);
  CHECK(one[0].bitmask() == 0);
  CHECK(one[1].bitmask() == 1);
  const auto all = enumerate_subsets(4);
  for (std::size_t k = 0; k < all.size(); ++k) CHECK(all[k].bitmask() == k);
  CHECK_THROWS_AS(enumerate_subsets(3, 4), ContractViolation);
}

TEST_CASE("subset counts match the factorial oracle") {
  for (unsigned n = 1; n <= 10; ++n) {
    CHECK(enumerate_subsets(n).size() == static_cast<std::size_t>(1) << n);
    std::size_t total = 0;
    for (unsigned x = 0; x <= n; ++x) {
      const auto plans = enumerate_subsets(n, x);
      const double expected = testing::factorial(n) / (testing::factorial(x) * testing::factorial(n - x));
      CHECK(static_cast<double>(plans.size()) == expected);
      for (const auto& p : plans) CHECK(p.x() == x);
      total += plans.size();
    }
    CHECK(total == static_cast<std::size_t>(1) << n);
  }
}

TEST_CASE("metric examples") {
  using testing::make_curve;
  std::vector<ReturnCurve> flat{make_curve({{0, 5}, {1, 5}}), make_curve({{0, 5}, {1, 5}})};
  auto m = max_return_metric(flat);
  CHECK(m.value == 5.0);
  CHECK(m.standard_error == 0.0);

  std::vector<ReturnCurve> two{make_curve({{0, 1}, {1, 3}}), make_curve({{0, 1}, {1, 1}})};
  m = max_return_metric(two);
  CHECK(m.value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(m.standard_error == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.best_step == 1);

  std::vector<ReturnCurve> sevens{make_curve({{3, 7}, {8, 7}, {9, 7}}), make_curve({{4, 7}})};
  auto a = average_return_metric(sevens);
  CHECK(a.value == 7.0);
  CHECK(a.standard_error == 0.0);

  std::vector<ReturnCurve> means{make_curve({{0, 1}, {1, 3}}), make_curve({{0, 4}, {1, 4}})};
  a = average_return_metric(means);
  CHECK(a.value == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(a.standard_error == doctest::Approx(1.0).epsilon(1e-12));

  // Ties resolve to the earliest step.
  std::vector<ReturnCurve> tie{make_curve({{0, 2}, {5, 1}, {9, 2}}), make_curve({{0, 2}, {5, 1}, {9, 2}})};
  CHECK(max_return_metric(tie).best_step == 0);

  std::vector<ReturnCurve> single{make_curve({{0, 1}})};
  CHECK_THROWS_AS(max_return_metric(single), ContractViolation);
  CHECK_THROWS_AS(average_return_metric(single), ContractViolation);
  std::vector<ReturnCurve> empty{make_curve({{0, 1}}), make_curve({})};
  CHECK_THROWS_AS(average_return_metric(empty), ContractViolation);
}

TEST_CASE("three-seed hand-computed metrics") {
  using testing::make_curve;
  // Grid from step 10: {10, 20, 25, 30}. Seed B's step-25 value holds at 30.
  std::vector<ReturnCurve> curves{make_curve({{0, 0}, {10, 2}, {20, 6}, {30, 4}}),
                                  make_curve({{10, 1}, {25, 5}}),
                                  make_curve({{5, 3}, {20, 4}, {30, 9}})};
  const auto grid = common_grid(curves);
  CHECK(grid == std::vector<std::uint64_t>{10, 20, 25, 30});
  // Means: (2+1+3)/3 = 2, (6+1+4)/3, (6+5+4)/3 = 5, (4+5+9)/3 = 6.
  const auto m = max_return_metric(curves);
  CHECK(m.value == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(m.best_step == 30);
  // std(4, 5, 9) = sqrt(7), SE = sqrt(7 / 3).
  CHECK(m.standard_error == doctest::Approx(std::sqrt(7.0 / 3.0)).epsilon(1e-12));

  const auto a = average_return_metric(curves);
  // Nine points summing to 34; seed means 3, 3, 16/3.
  CHECK(a.value == doctest::Approx(34.0 / 9.0).epsilon(1e-12));
  const std::vector<double> seed_means{3.0, 3.0, 16.0 / 3.0};
  CHECK(a.standard_error == doctest::Approx(testing::sample_std(seed_means) / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("metrics match brute-force oracles on random curves") {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ReturnCurve> curves;
    const std::size_t seeds = 2 + rng.index(4);
    for (std::size_t s = 0; s < seeds; ++s) curves.push_back(testing::random_curve(rng, s));
    const auto m = max_return_metric(curves);
    const auto oracle = testing::max_return_oracle(curves);
    REQUIRE(m.best_step == oracle.step);
    REQUIRE(std::abs(m.value - oracle.value) <= 1e-12);
    REQUIRE(std::abs(m.standard_error - oracle.se) <= 1e-12);

    // Dominance over every per-step cross-seed mean.
    const auto grid = common_grid(curves);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double mean = 0.0;
      for (const auto& c : curves) mean += resample(c, grid)[g];
      REQUIRE(m.value >= mean / static_cast<double>(curves.size()) - 1e-12);
    }

    const auto a = average_return_metric(curves);
    const auto [flat, se] = testing::average_return_oracle(curves);
    REQUIRE(std::abs(a.value - flat) <= 1e-12);
    REQUIRE(std::abs(a.standard_error - se) <= 1e-12);

    std::vector<ReturnCurve> shuffled = curves;
    std::reverse(shuffled.begin(), shuffled.end());
    REQUIRE(std::abs(average_return_metric(shuffled).value - a.value) <= 1e-12);
  }
}

TEST_CASE("ranking and summaries") {
  std::vector<store::RunRecord> runs{record(1, 0, {3, 3}), record(1, 1, {3, 3}), record(2, 0, {5, 5}),
                                     record(2, 1, {5, 5}), record(0, 0, {1, 2}), record(0, 1, {2, 1}),
                                     record(3, 0, {4, 4}), record(3, 1, {4, 6})};
  const auto summaries = summarize_plans(runs);
  REQUIRE(summaries.size() == 4);
  CHECK(summaries[0].plan.bitmask() == 0);
  CHECK(summaries[0].avg_return.value == 1.5);
  CHECK(summaries[0].n_seeds == 2);

  const Ranking r1 = rank_plans(summaries, 2, 1);
  CHECK(r1.best().plan.bitmask() == 2);
  CHECK(r1.worst().plan.bitmask() == 1);
  const Ranking r2 = rank_plans(summaries, 2, 2);
  CHECK(r2.best().plan == r2.worst().plan);

  std::vector<store::RunRecord> reversed(runs.rbegin(), runs.rend());
  const auto again = summarize_plans(reversed);
  CHECK(rank_plans(again, 2, 1).best().plan.bitmask() == 2);

  std::vector<store::RunRecord> partial(runs.begin(), runs.begin() + 2);
  try {
    rank_plans(summarize_plans(partial), 2, 1);
    FAIL("incomplete store ranked");
  } catch (const IncompleteStore& e) {
    CHECK(e.missing() == std::vector<std::uint64_t>{2});
  }

  // Equal averages fall back to bitmask order.
  std::vector<store::RunRecord> tied{record(1, 0, {3}), record(1, 1, {3}), record(2, 0, {3}), record(2, 1, {3})};
  CHECK(rank_plans(summarize_plans(tied), 2, 1).best().plan.bitmask() == 1);

  const auto by_x = summarize_by_x(runs);
  REQUIRE(by_x.size() == 3);
  CHECK(by_x[1].x == 1);
  CHECK(by_x[1].n_runs == 4);
  CHECK(by_x[1].n_plans == 2);
  CHECK(by_x[1].avg_return.value == 4.0);
}

TEST_CASE("per-x pooling counts seeds times combinations") {
  std::vector<store::RunRecord> runs;
  Rng rng(3);
  for (const auto& plan : enumerate_subsets(6))
    for (std::uint64_t seed = 0; seed < 5; ++seed) runs.push_back(record(plan.bitmask(), seed, {rng.uniform(0, 1)}, 6));
  for (const auto& s : summarize_by_x(runs)) {
    const double combos = testing::factorial(6) / (testing::factorial(s.x) * testing::factorial(6 - s.x));
    CHECK(static_cast<double>(s.n_runs) == 5 * combos);
    CHECK(static_cast<double>(s.n_plans) == combos);
  }
}

TEST_CASE("csv output") {
  std::vector<store::RunRecord> runs{record(0, 0, {1, 2}), record(0, 1, {2, 1})};
  const std::string csv = metrics_csv(summarize_plans(runs));
  CHECK(csv.rfind("plan_bitmask,x,max_return,max_return_se,avg_return,avg_return_se,n_seeds\n", 0) == 0);
  CHECK(csv.find("\n0,0,") != std::string::npos);
  CHECK(csv.substr(csv.size() - 3) == ",2\n");
  CHECK(metrics_by_x_csv(summarize_by_x(runs)).rfind("x,max_return", 0) == 0);
}

TEST_CASE("sweep writes every run and resumes idempotently") {
  const fs::path dir = fresh_dir("marl_test_sweep");
  const fs::path teacher = tiny_teacher(dir);
  SweepSpec spec{tiny_experiment(teacher)};

  store::ResultsStore clean(dir / "clean");
  const SweepReport full = run_sweep(spec, clean);
  CHECK(full.planned == 8);
  CHECK(full.completed == 8);
  CHECK(full.failed.empty());
  CHECK(clean.load_runs().size() == 8);
  const SweepReport again = run_sweep(spec, clean);
  CHECK(again.completed == 0);
  CHECK(again.skipped_existing == 8);

  store::ResultsStore interrupted(dir / "interrupted");
  SweepOptions stop;
  stop.max_new_runs = 3;
  CHECK(run_sweep(spec, interrupted, stop).completed == 3);
  CHECK(interrupted.load_runs().size() == 3);
  const SweepReport resumed = run_sweep(spec, interrupted);
  CHECK(resumed.skipped_existing == 3);
  CHECK(resumed.completed == 5);
  CHECK(snapshot(clean.root()) == snapshot(interrupted.root()));

  const auto runs = clean.load_runs();
  for (const auto& r : runs) {
    CHECK(r.manifest["plan"]["bitmask"] == r.plan.bitmask());
    CHECK(r.manifest["teacher_sequences_after_phase"] == 0);
    CHECK(r.curve.points.size() == 12);
  }
}

TEST_CASE("failed runs are recorded and skipped") {
  const fs::path dir = fresh_dir("marl_test_sweep_fail");
  SweepSpec spec{tiny_experiment(dir / "missing.mds")};
  store::ResultsStore st(dir / "store");
  std::vector<std::string> finished;
  SweepOptions opts;
  opts.on_run_finished = [&](const std::string& id, bool) { finished.push_back(id); };
  const SweepReport report = run_sweep(spec, st, opts);
  CHECK(report.completed == 2);  // tabula rasa needs no teacher
  CHECK(report.failed.size() == 6);
  CHECK(finished.size() == 8);
  CHECK(st.failures().size() == 6);
  CHECK(st.load_runs().size() == 2);
}

TEST_CASE("parallel sweep matches the sequential one") {
  const fs::path dir = fresh_dir("marl_test_sweep_par");
  const fs::path teacher = tiny_teacher(dir);
  SweepSpec seq{tiny_experiment(teacher)};
  SweepSpec par = seq;
  par.base.sweep.parallelism = 3;
  store::ResultsStore a(dir / "seq"), b(dir / "par");
  run_sweep(seq, a);
  run_sweep(par, b);
  // Manifests record the parallelism setting; curves must agree exactly.
  auto curves = [](const fs::path& root) {
    auto files = snapshot(root);
    std::erase_if(files, [](const auto& kv) { return kv.first.rfind("curves/", 0) != 0; });
    return files;
  };
  CHECK(curves(a.root()).size() == 8);
  CHECK(curves(a.root()) == curves(b.root()));
}
