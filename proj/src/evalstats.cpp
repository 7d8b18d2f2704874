#include "marl/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "marl/errors.hpp"
#include "marl/rng.hpp"

namespace marl::evalstats {

void ScoreSet::validate() const {
  if (scores.empty()) throw ContractViolation("score set '" + label + "' is empty");
  for (double s : scores)
    if (!std::isfinite(s)) throw ContractViolation("score set '" + label + "' holds a non-finite score");
}

std::vector<double> performance_profile(std::span<const double> scores, std::span<const double> thresholds) {
  require(!scores.empty(), "performance profile of an empty score set");
  require(std::is_sorted(thresholds.begin(), thresholds.end()), "thresholds must be sorted ascending");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (double tau : thresholds) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), tau);
    out.push_back(static_cast<double>(above) / static_cast<double>(sorted.size()));
  }
  return out;
}

double probability_of_improvement(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "probability of improvement needs non-empty score sets");
  // Count in half-units so the total is an exact integer.
  std::uint64_t half_wins = 0;
  for (double x : a)
    for (double y : b) half_wins += x > y ? 2 : (x == y ? 1 : 0);
  return static_cast<double>(half_wins) / (2.0 * static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

double mean(std::span<const double> scores) {
  require(!scores.empty(), "mean of an empty score set");
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(scores.size());
}

double median(std::span<const double> scores) {
  require(!scores.empty(), "median of an empty score set");
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

double interquartile_mean(std::span<const double> scores) {
  require(!scores.empty(), "IQM of an empty score set");
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double weighted = 0.0, weight_total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    // Overlap of [i/n, (i+1)/n] with [1/4, 3/4], in units of 1/(4n) to stay exact.
    const double lo = std::max(4.0 * static_cast<double>(i), n);
    const double hi = std::min(4.0 * static_cast<double>(i + 1), 3.0 * n);
    const double w = std::max(0.0, hi - lo);
    weighted += w * s[i];
    weight_total += w;
  }
  return weighted / weight_total;
}

double optimality_gap(std::span<const double> scores, double ceiling) {
  require(!scores.empty(), "optimality gap of an empty score set");
  double total = 0.0;
  for (double s : scores) total += std::max(ceiling - s, 0.0);
  return total / static_cast<double>(scores.size());
}

namespace {

void draw(std::span<const std::vector<double>> strata, std::uint64_t seed, std::size_t b,
          std::vector<std::vector<double>>& scratch) {
  Rng rng(derive_seed(seed, b));
  for (std::size_t s = 0; s < strata.size(); ++s) {
    const auto& src = strata[s];
    scratch[s].resize(src.size());
    for (double& v : scratch[s]) v = src[rng.index(src.size())];
  }
}

void check_strata(std::span<const std::vector<double>> strata, const BootstrapOptions& options) {
  require(!strata.empty(), "bootstrap needs at least one stratum");
  for (const auto& s : strata) require(!s.empty(), "bootstrap stratum is empty");
  require(options.resamples >= 1, "bootstrap needs at least one resample");
}

}  // namespace

namespace serial {

std::vector<double> bootstrap_distribution(std::span<const std::vector<double>> strata, const Statistic& statistic,
                                           const BootstrapOptions& options) {
  check_strata(strata, options);
  std::vector<double> out(options.resamples);
  std::vector<std::vector<double>> scratch(strata.size());
  for (std::size_t b = 0; b < options.resamples; ++b) {
    draw(strata, options.seed, b, scratch);
    out[b] = statistic(scratch);
  }
  return out;
}

}  // namespace serial

std::vector<double> bootstrap_distribution(std::span<const std::vector<double>> strata, const Statistic& statistic,
                                           const BootstrapOptions& options) {
  check_strata(strata, options);
  std::vector<double> out(options.resamples);
  const auto total = static_cast<std::int64_t>(options.resamples);
#pragma omp parallel
  {
    std::vector<std::vector<double>> scratch(strata.size());
#pragma omp for schedule(static)
    for (std::int64_t bb = 0; bb < total; ++bb) {
      const auto b = static_cast<std::size_t>(bb);
      draw(strata, options.seed, b, scratch);
      out[b] = statistic(scratch);
    }
  }
  return out;
}

Interval percentile_interval(std::vector<double> distribution, double confidence) {
  require(!distribution.empty(), "percentile interval of an empty distribution");
  require(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0, 1)");
  std::sort(distribution.begin(), distribution.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(distribution.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, distribution.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return distribution[lo] + frac * (distribution[hi] - distribution[lo]);
  };
  const double tail = 0.5 * (1.0 - confidence);
  return {quantile(tail), quantile(1.0 - tail)};
}

Estimate probability_of_improvement_ci(const ScoreSet& a, const ScoreSet& b, const BootstrapOptions& options) {
  a.validate();
  b.validate();
  const std::vector<std::vector<double>> strata{a.scores, b.scores};
  const auto dist = bootstrap_distribution(
      strata, [](std::span<const std::vector<double>> s) { return probability_of_improvement(s[0], s[1]); }, options);
  return {probability_of_improvement(a.scores, b.scores), percentile_interval(dist, options.confidence)};
}

AggregateScores aggregate_scores(const ScoreSet& set, double ceiling, const BootstrapOptions& options) {
  set.validate();
  const std::vector<std::vector<double>> strata{set.scores};
  auto estimate = [&](auto fn) {
    const auto dist = bootstrap_distribution(
        strata, [&fn](std::span<const std::vector<double>> s) { return fn(std::span<const double>(s[0])); }, options);
    return Estimate{fn(std::span<const double>(set.scores)), percentile_interval(dist, options.confidence)};
  };
  AggregateScores out;
  out.mean = estimate([](std::span<const double> s) { return mean(s); });
  out.median = estimate([](std::span<const double> s) { return median(s); });
  out.iqm = estimate([](std::span<const double> s) { return interquartile_mean(s); });
  out.optimality_gap = estimate([ceiling](std::span<const double> s) { return optimality_gap(s, ceiling); });
  return out;
}

double final_performance(const learner::ReturnCurve& curve, double fraction) {
  require(!curve.points.empty(), "final performance of an empty curve");
  require(fraction > 0.0 && fraction <= 1.0, "window fraction must lie in (0, 1]");
  const std::size_t n = curve.points.size();
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  double total = 0.0;
  for (std::size_t i = n - keep; i < n; ++i) total += curve.points[i].episode_return;
  return total / static_cast<double>(keep);
}

}  // namespace marl::evalstats
