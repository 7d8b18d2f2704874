#include <doctest.h>

#include <omp.h>

#include "marl/errors.hpp"
#include "marl/evalstats.hpp"
#include "support.hpp"

using namespace marl;
using namespace marl::evalstats;

namespace {

std::vector<double> random_scores(Rng& rng, std::size_t n, bool with_ties) {
  std::vector<double> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(with_ties ? static_cast<double>(rng.index(5)) : rng.uniform(-10, 10));
  return s;
}

}  // namespace

TEST_CASE("performance profile examples") {
  const std::vector<double> scores{1, 2, 3};
  const std::vector<double> taus{0.0, 1.5, 3.0, 4.0};
  const auto p = performance_profile(scores, taus);
  CHECK(p[0] == 1.0);
  CHECK(p[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(p[2] == 0.0);
  CHECK(p[3] == 0.0);
}

TEST_CASE("performance profile matches exhaustive counting") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto scores = random_scores(rng, 1 + rng.index(30), trial % 2 == 0);
    std::vector<double> taus;
    for (double t = -11.0; t <= 11.0; t += 0.25) taus.push_back(t);
    const auto p = performance_profile(scores, taus);
    for (std::size_t k = 0; k < taus.size(); ++k) {
      std::size_t above = 0;
      for (double s : scores) above += s > taus[k];
      REQUIRE(p[k] == static_cast<double>(above) / static_cast<double>(scores.size()));
      if (k > 0) REQUIRE(p[k] <= p[k - 1]);
    }
  }
}

TEST_CASE("probability of improvement") {
  const std::vector<double> a{2, 3}, b{1, 2};
  CHECK(probability_of_improvement(a, b) == 0.875);
  CHECK(probability_of_improvement(a, a) == 0.5);
  const std::vector<double> hi{5, 6, 7}, lo{1, 2};
  CHECK(probability_of_improvement(hi, lo) == 1.0);
  CHECK(probability_of_improvement(lo, hi) == 0.0);

  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_scores(rng, 1 + rng.index(12), trial % 2 == 0);
    const auto y = random_scores(rng, 1 + rng.index(12), trial % 2 == 0);
    REQUIRE(probability_of_improvement(x, y) + probability_of_improvement(y, x) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("aggregate statistics") {
  const std::vector<double> four{4, 1, 3, 2};
  CHECK(interquartile_mean(four) == 2.5);
  CHECK(mean(four) == 2.5);
  CHECK(median(four) == 2.5);
  const std::vector<double> odd{5, 1, 3};
  CHECK(median(odd) == 3.0);
  CHECK(optimality_gap(four, 3.0) == doctest::Approx(0.75));
  CHECK(optimality_gap(four, 0.0) == 0.0);

  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_scores(rng, 1 + rng.index(40), trial % 3 == 0);
    REQUIRE(std::abs(interquartile_mean(s) - testing::iqm_oracle(s)) <= 1e-12);
  }
}

TEST_CASE("constant scores give zero-width intervals") {
  const ScoreSet set{"c", std::vector<double>(7, 4.25)};
  const auto agg = aggregate_scores(set, 5.0);
  for (const Estimate& e : {agg.mean, agg.median, agg.iqm}) {
    CHECK(e.value == 4.25);
    CHECK(e.ci.low == 4.25);
    CHECK(e.ci.high == 4.25);
  }
  CHECK(agg.optimality_gap.value == doctest::Approx(0.75));
  CHECK(agg.optimality_gap.ci.high - agg.optimality_gap.ci.low == doctest::Approx(0.0));
}

TEST_CASE("bootstrap intervals bracket the estimate and are reproducible") {
  Rng rng(14);
  const ScoreSet a{"a", random_scores(rng, 20, false)};
  ScoreSet b{"b", random_scores(rng, 15, false)};
  for (double& s : b.scores) s -= 3.0;
  const auto agg = aggregate_scores(a, 10.0);
  for (const Estimate& e : {agg.mean, agg.median, agg.iqm, agg.optimality_gap}) {
    CHECK(e.ci.low <= e.value);
    CHECK(e.value <= e.ci.high);
    CHECK(e.ci.low < e.ci.high);
  }
  const auto poi = probability_of_improvement_ci(a, b);
  CHECK(poi.value == probability_of_improvement(a.scores, b.scores));
  CHECK(poi.ci.low <= poi.value);
  CHECK(poi.value <= poi.ci.high);
  const auto again = probability_of_improvement_ci(a, b);
  CHECK(again.ci.low == poi.ci.low);
  CHECK(again.ci.high == poi.ci.high);

  BootstrapOptions other;
  other.seed = 99;
  CHECK(probability_of_improvement_ci(a, b, other).ci.low != poi.ci.low);
}

TEST_CASE("percentile interval") {
  std::vector<double> dist;
  for (int k = 0; k <= 100; ++k) dist.push_back(100 - k);
  const Interval ci = percentile_interval(dist, 0.9);
  CHECK(ci.low == doctest::Approx(5.0));
  CHECK(ci.high == doctest::Approx(95.0));
}

TEST_CASE("parallel bootstrap equals the serial reference") {
  Rng rng(15);
  const std::vector<std::vector<double>> strata{random_scores(rng, 25, false), random_scores(rng, 18, true)};
  const Statistic stat = [](std::span<const std::vector<double>> s) {
    return probability_of_improvement(s[0], s[1]) + interquartile_mean(s[0]);
  };
  BootstrapOptions opts;
  opts.resamples = 500;
  const auto reference = serial::bootstrap_distribution(strata, stat, opts);
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    REQUIRE(bootstrap_distribution(strata, stat, opts) == reference);
  }
  // Stratified: every resample keeps each stratum's size.
  const Statistic sizes = [](std::span<const std::vector<double>> s) {
    return static_cast<double>(s[0].size() * 100 + s[1].size());
  };
  for (double v : bootstrap_distribution(strata, sizes, opts)) REQUIRE(v == 2518.0);
}

TEST_CASE("final performance and validation") {
  const auto curve = testing::make_curve({{1, 1}, {2, 2}, {3, 3}, {4, 4}, {5, 5}, {6, 6}, {7, 7}, {8, 8}, {9, 9}, {10, 10}});
  CHECK(final_performance(curve, 0.05) == 10.0);
  CHECK(final_performance(curve, 0.2) == 9.5);
  CHECK(final_performance(curve, 1.0) == 5.5);
  CHECK_THROWS_AS((ScoreSet{"empty", {}}.validate()), ContractViolation);
  CHECK_THROWS_AS((ScoreSet{"nan", {1.0, NAN}}.validate()), ContractViolation);
}
