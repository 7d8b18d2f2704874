#pragma once

// Independent oracles and generators shared by the unit tests and the
// acceptance binary. Nothing here calls the code path it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "marl/autodiff.hpp"
#include "marl/learner.hpp"
#include "marl/replay.hpp"
#include "marl/rng.hpp"

namespace marl::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Central finite differences against backprop. `loss` records a fresh
// forward pass on the given tape and binds the parameters itself. Relative
// error uses max(|analytic|, |numeric|, 1e-3) as the denominator so entries
// with vanishing gradient are compared absolutely.
inline GradCheck gradient_check(const std::vector<ad::Parameter*>& params,
                                const std::function<ad::Var(ad::Tape&)>& loss, double h = 1e-5) {
  for (ad::Parameter* p : params) p->zero_grad();
  {
    ad::Tape tape;
    tape.backward(loss(tape));
  }
  GradCheck out;
  for (ad::Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      double up, down;
      {
        ad::Tape t;
        up = loss(t).value().item();
      }
      p->value[i] = saved - h;
      {
        ad::Tape t;
        down = loss(t).value().item();
      }
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
      ++out.checked;
    }
  }
  return out;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Forward-view lambda-return: a (1 - lambda)-weighted mix of n-step returns
// with the remaining weight on the longest one. An n-step return stops at a
// done flag and otherwise bootstraps with gamma^n * v_{t+n}.
inline std::vector<double> lambda_return_oracle(const std::vector<double>& rewards, const std::vector<std::uint8_t>& dones,
                                                const std::vector<double>& bootstrap, double gamma, double lambda) {
  const std::size_t L = rewards.size();
  std::vector<double> out(L);
  for (std::size_t t = 0; t < L; ++t) {
    const std::size_t N = L - t;
    auto n_step = [&](std::size_t n) {
      double g = 0.0, disc = 1.0;
      for (std::size_t k = 0; k < n; ++k) {
        g += disc * rewards[t + k];
        if (dones[t + k]) return g;
        disc *= gamma;
      }
      return g + disc * bootstrap[t + n - 1];
    };
    double total = 0.0;
    for (std::size_t n = 1; n < N; ++n) total += (1.0 - lambda) * std::pow(lambda, static_cast<double>(n - 1)) * n_step(n);
    total += std::pow(lambda, static_cast<double>(N - 1)) * n_step(N);
    out[t] = total;
  }
  return out;
}

inline replay::EpisodeSequence random_episode(std::size_t agent, std::size_t obs_dim, std::size_t act_dim,
                                              std::size_t length, Rng& rng) {
  replay::EpisodeSequence ep;
  ep.agent_id = agent;
  ep.obs_dim = obs_dim;
  ep.act_dim = act_dim;
  for (std::size_t i = 0; i < (length + 1) * obs_dim; ++i) ep.observations.push_back(static_cast<float>(rng.uniform(-2, 2)));
  for (std::size_t i = 0; i < length * act_dim; ++i) ep.actions.push_back(static_cast<float>(rng.uniform(-1, 1)));
  for (std::size_t i = 0; i < length; ++i) {
    ep.rewards.push_back(static_cast<float>(rng.uniform(-1, 1)));
    ep.dones.push_back(i + 1 == length ? 1 : 0);
  }
  return ep;
}

// Synthetic JointReacher-shaped dataset; agent order of episodes matches.
inline replay::TeacherDataset random_dataset(std::size_t n_agents, std::size_t episodes, std::size_t length, Rng& rng) {
  replay::TeacherDataset ds;
  ds.spec.env_id = "JointReacher";
  ds.spec.n_agents = n_agents;
  ds.spec.obs_dims.assign(n_agents, 2);
  ds.spec.act_dims.assign(n_agents, 1);
  ds.spec.action_low.assign(n_agents, {-1.0});
  ds.spec.action_high.assign(n_agents, {1.0});
  ds.spec.episode_length = length;
  for (std::size_t i = 0; i < n_agents; ++i) ds.spec.agent_names.push_back("J" + std::to_string(i));
  ds.quality_tag = "full";
  ds.source_run_id = "synthetic_" + std::to_string(rng.next_u64() % 1000);
  ds.episodes.resize(n_agents);
  for (std::size_t e = 0; e < episodes; ++e) {
    auto shared = random_episode(0, 2, 1, length, rng);
    for (std::size_t i = 0; i < n_agents; ++i) {
      auto ep = random_episode(i, 2, 1, length, rng);
      ep.rewards = shared.rewards;
      ep.source = replay::Source::teacher;
      ds.episodes[i].push_back(std::move(ep));
    }
  }
  return ds;
}

inline learner::ReturnCurve make_curve(std::vector<std::pair<std::uint64_t, double>> pts, std::uint64_t seed = 0) {
  learner::ReturnCurve c;
  c.seed = seed;
  for (auto [s, v] : pts) c.points.push_back({s, v});
  return c;
}

// Random curve with strictly increasing steps starting somewhere in [0, 20].
inline learner::ReturnCurve random_curve(Rng& rng, std::uint64_t seed) {
  learner::ReturnCurve c;
  c.seed = seed;
  std::uint64_t step = rng.index(20);
  const std::size_t n = 3 + rng.index(30);
  for (std::size_t i = 0; i < n; ++i) {
    c.points.push_back({step, std::round(rng.uniform(-50, 50) * 4.0) / 4.0});
    step += 1 + rng.index(15);
  }
  return c;
}

// Oracle for the max-return metric: explicit grid scan with its own
// nearest-preceding lookup.
struct MaxOracle {
  double value;
  double se;
  std::uint64_t step;
};

inline double sample_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline MaxOracle max_return_oracle(const std::vector<learner::ReturnCurve>& curves) {
  std::uint64_t start = 0;
  for (const auto& c : curves) start = std::max(start, c.points.front().step);
  std::vector<std::uint64_t> grid;
  for (const auto& c : curves)
    for (const auto& p : c.points)
      if (p.step >= start) grid.push_back(p.step);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  MaxOracle best{-INFINITY, 0.0, 0};
  for (std::uint64_t g : grid) {
    std::vector<double> at;
    for (const auto& c : curves) {
      double v = NAN;
      for (const auto& p : c.points)
        if (p.step <= g) v = p.episode_return;
      at.push_back(v);
    }
    double m = 0.0;
    for (double x : at) m += x;
    m /= static_cast<double>(at.size());
    if (m > best.value) best = {m, sample_std(at) / std::sqrt(static_cast<double>(at.size())), g};
  }
  return best;
}

inline std::pair<double, double> average_return_oracle(const std::vector<learner::ReturnCurve>& curves) {
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> seed_means;
  for (const auto& c : curves) {
    double s = 0.0;
    for (const auto& p : c.points) s += p.episode_return, total += p.episode_return, ++count;
    seed_means.push_back(s / static_cast<double>(c.points.size()));
  }
  return {total / static_cast<double>(count), sample_std(seed_means) / std::sqrt(static_cast<double>(curves.size()))};
}

// IQM by explicit trimming: replicate every score four times, drop the lowest
// and highest n copies out of 4n, and average the middle 2n.
inline double iqm_oracle(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end());
  std::vector<double> rep;
  for (double s : scores)
    for (int k = 0; k < 4; ++k) rep.push_back(s);
  const std::size_t n = scores.size();
  double total = 0.0;
  for (std::size_t i = n; i < 3 * n; ++i) total += rep[i];
  return total / static_cast<double>(2 * n);
}

inline double factorial(unsigned n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

}  // namespace marl::testing
