#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "marl/learner.hpp"

// Score statistics over runs: performance profiles, probability of
// improvement and aggregate scores with percentile-bootstrap intervals.
namespace marl::evalstats {

struct ScoreSet {
  std::string label;
  std::vector<double> scores;

  // Non-empty and finite.
  void validate() const;
};

// Fraction of scores strictly above each threshold (thresholds ascending).
std::vector<double> performance_profile(std::span<const double> scores, std::span<const double> thresholds);

// P(A > B) over all |A|*|B| pairs, ties counted one half.
double probability_of_improvement(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> scores);
double median(std::span<const double> scores);
// Mean of the middle 50% by count. Each sorted score covers 1/n of the
// quantile axis and is weighted by its overlap with [0.25, 0.75].
double interquartile_mean(std::span<const double> scores);
// Mean shortfall below `ceiling`: mean(max(ceiling - s, 0)).
double optimality_gap(std::span<const double> scores, double ceiling);

struct BootstrapOptions {
  std::size_t resamples = 2000;
  std::uint64_t seed = 1234;
  double confidence = 0.95;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct Estimate {
  double value = 0.0;
  Interval ci;
};

// Statistic over one resample per stratum.
using Statistic = std::function<double(std::span<const std::vector<double>>)>;

// Statistic on `resamples` stratified bootstrap draws. Draw b uses its own
// generator seeded from (seed, b), so the OpenMP loop and the serial
// reference return identical vectors.
std::vector<double> bootstrap_distribution(std::span<const std::vector<double>> strata, const Statistic& statistic,
                                           const BootstrapOptions& options);

namespace serial {
std::vector<double> bootstrap_distribution(std::span<const std::vector<double>> strata, const Statistic& statistic,
                                           const BootstrapOptions& options);
}  // namespace serial

// Percentile interval of a bootstrap distribution.
Interval percentile_interval(std::vector<double> distribution, double confidence);

Estimate probability_of_improvement_ci(const ScoreSet& a, const ScoreSet& b, const BootstrapOptions& options = {});

struct AggregateScores {
  Estimate mean;
  Estimate median;
  Estimate iqm;
  Estimate optimality_gap;
};

AggregateScores aggregate_scores(const ScoreSet& set, double ceiling, const BootstrapOptions& options = {});

// Mean return over the trailing `fraction` of a run's logged points (at least one).
double final_performance(const learner::ReturnCurve& curve, double fraction = 0.05);

}  // namespace marl::evalstats
