#include <doctest.h>

#include <cmath>

#include "marl/env.hpp"
#include "marl/errors.hpp"
#include "marl/rng.hpp"

using namespace marl;
using namespace marl::env;

namespace {

JointVec constant_actions(const EnvSpec& spec, double value) {
  JointVec a(spec.n_agents);
  for (std::size_t i = 0; i < spec.n_agents; ++i) a[i].assign(spec.act_dims[i], value);
  return a;
}

JointVec random_actions(const EnvSpec& spec, Rng& rng, double lo = -1.0, double hi = 1.0) {
  JointVec a(spec.n_agents);
  for (std::size_t i = 0; i < spec.n_agents; ++i)
    for (std::size_t d = 0; d < spec.act_dims[i]; ++d) a[i].push_back(rng.uniform(lo, hi));
  return a;
}

}  // namespace

TEST_CASE("reset is deterministic per seed") {
  for (const char* id : {"ChainCheetah", "JointReacher"}) {
    auto env = make_environment(id, 6, 50);
    const auto a = env->reset(7);
    const auto b = env->reset(7);
    CHECK(a.observations == b.observations);
    CHECK(a.state.s == b.state.s);
    CHECK(env->reset(8).state.s != a.state.s);
  }
}

TEST_CASE("ChainCheetah rests with zero velocities") {
  ChainCheetah env;
  const auto r = env.reset(3);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(r.state.s[i] >= -0.1);
    CHECK(r.state.s[i] <= 0.1);
    CHECK(r.state.s[6 + i] == 0.0);
    CHECK(r.observations[i][2] == 0.0);
  }
  CHECK(r.state.s[12] == 0.0);
}

TEST_CASE("ChainCheetah zero torque from rest yields zero reward") {
  ChainCheetahParams p;
  p.init_angle_range = 0.0;
  ChainCheetah env(p);
  auto r = env.reset(11);
  for (int k = 0; k < 20; ++k) {
    const auto step = env.step(r.state, constant_actions(env.spec(), 0.0));
    CHECK(step.reward == 0.0);
    CHECK(step.observations[0][3] == 0.0);
  }
}

TEST_CASE("ChainCheetah constant torque replays identically") {
  ChainCheetah env;
  auto run = [&] {
    auto r = env.reset(5);
    JointVec a = constant_actions(env.spec(), 0.0);
    a[2][0] = 0.7;
    std::vector<double> trace;
    for (int k = 0; k < 10; ++k) {
      const auto s = env.step(r.state, a);
      trace.push_back(s.reward);
      for (const auto& o : s.observations) trace.insert(trace.end(), o.begin(), o.end());
    }
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("ChainCheetah velocities stay finite over 1000 steps") {
  ChainCheetahParams p;
  p.episode_length = 1000;
  ChainCheetah env(p);
  Rng rng(42);
  auto r = env.reset(1);
  bool done = false;
  std::size_t steps = 0;
  double max_speed = 0.0;
  while (!done) {
    const auto s = env.step(r.state, random_actions(env.spec(), rng, -3.0, 3.0));
    done = s.done;
    ++steps;
    for (double v : r.state.s) REQUIRE(std::isfinite(v));
    for (std::size_t i = 0; i < 6; ++i) max_speed = std::max(max_speed, std::abs(r.state.s[6 + i]));
  }
  CHECK(steps == 1000);
  // Clipped torque over damping bounds the terminal joint speed.
  CHECK(max_speed < 1.0 / p.damping + 1.0);
}

TEST_CASE("episodes end exactly at the horizon") {
  auto env = make_environment("JointReacher", 3, 20);
  auto r = env->reset(0);
  for (std::size_t t = 1; t <= 20; ++t) {
    const auto s = env->step(r.state, constant_actions(env->spec(), 0.3));
    CHECK(s.done == (t == 20));
  }
  CHECK_THROWS_AS(env->step(r.state, constant_actions(env->spec(), 0.0)), ContractViolation);
}

TEST_CASE("step rejects malformed joint actions") {
  auto env = make_environment("JointReacher", 2, 20);
  auto r = env->reset(0);
  CHECK_THROWS_AS(env->step(r.state, JointVec{{0.0}}), ContractViolation);
  CHECK_THROWS_AS(env->step(r.state, JointVec{{0.0}, {0.0, 1.0}}), ContractViolation);
}

TEST_CASE("actions are clipped before the dynamics") {
  auto env = make_environment("JointReacher", 2, 20);
  auto a = env->reset(4);
  auto b = env->reset(4);
  const auto sa = env->step(a.state, constant_actions(env->spec(), 5.0));
  const auto sb = env->step(b.state, constant_actions(env->spec(), 1.0));
  CHECK(sa.reward == sb.reward);
  CHECK(a.state.s == b.state.s);
}

TEST_CASE("agent names") {
  ChainCheetah cheetah;
  const auto names = agent_names(cheetah.spec());
  REQUIRE(names.size() == 6);
  CHECK(names.front() == "BA");
  CHECK(names.back() == "FH");
  CHECK(names == std::vector<std::string>{"BA", "BK", "BH", "FA", "FK", "FH"});
  auto reacher = make_environment("JointReacher", 4, 20);
  CHECK(agent_names(reacher->spec()) == std::vector<std::string>{"J0", "J1", "J2", "J3"});
  CHECK(agent_names(reacher->spec()) == agent_names(reacher->spec()));
}

TEST_CASE("ChainCheetah observations are local") {
  ChainCheetah env;
  auto r = env.reset(9);
  EnvState other = r.state;
  other.s[1] += 0.3;  // angle of joint 1
  other.s[6 + 4] -= 0.2;  // velocity of joint 4
  const auto a = env.observe(r.state);
  const auto b = env.observe(other);
  for (std::size_t i : {0, 2, 3, 5}) CHECK(a[i] == b[i]);
  CHECK(a[1] != b[1]);
  CHECK(a[4] != b[4]);
}

TEST_CASE("JointReacher reset and rewards") {
  auto env = make_environment("JointReacher", 3, 20);
  const auto r = env->reset(12);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.state.s[i] == 0.0);
    CHECK(std::abs(r.state.s[3 + i]) <= 1.0);
    CHECK(r.observations[i] == Vec{0.0, r.state.s[3 + i] / 0.1});
  }
  // Standing on the goal with zero action earns the maximum reward.
  EnvState on_goal = r.state;
  for (std::size_t i = 0; i < 3; ++i) on_goal.s[i] = on_goal.s[3 + i];
  CHECK(env->step(on_goal, constant_actions(env->spec(), 0.0)).reward == 0.0);
}

TEST_CASE("JointReacher optimal return examples") {
  JointReacherParams one;
  one.n_agents = 1;
  JointReacher single(one);
  EnvState s{{0.0, 0.5}, 0, 0};
  CHECK(single.optimal_return_from(s) == doctest::Approx(-1.0).epsilon(1e-12));
  EnvState at_zero{{0.0, 0.0}, 0, 0};
  CHECK(single.optimal_return_from(at_zero) == 0.0);

  JointReacher pair;
  EnvState zeros{{0.0, 0.0, 0.0, 0.0}, 0, 0};
  CHECK(pair.optimal_return_from(zeros) == 0.0);

  ChainCheetah cheetah;
  CHECK_THROWS_AS(optimal_return(cheetah, 0), Unsupported);
}

TEST_CASE("greedy policy attains the optimum and random policies never beat it") {
  JointReacher env;
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint64_t seed = rng.next_u64();
    const double best = env.optimal_return(seed);
    auto r = env.reset(seed);
    double total = 0.0;
    const int style = trial % 3;
    const double constant = rng.uniform(-1, 1);
    for (std::size_t t = 0; t < 20; ++t) {
      JointVec a = style == 0 ? random_actions(env.spec(), rng) : constant_actions(env.spec(), constant);
      if (style == 2)
        for (std::size_t i = 0; i < 2; ++i) a[i][0] = (r.state.s[2 + i] - r.state.s[i]) / 0.1 + rng.uniform(-0.5, 0.5);
      total += env.step(r.state, a).reward;
    }
    REQUIRE(total <= best + 1e-12);

    auto g = env.reset(seed);
    double greedy = 0.0;
    for (std::size_t t = 0; t < 20; ++t) {
      JointVec a(2);
      for (std::size_t i = 0; i < 2; ++i) a[i] = {(g.state.s[2 + i] - g.state.s[i]) / 0.1};
      greedy += env.step(g.state, a).reward;
    }
    REQUIRE(greedy == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("relabeled JointReacher describes the same system") {
  auto base = make_environment("JointReacher", 3, 20);
  auto perm = make_environment("JointReacher", 3, 20, {2, 0, 1});
  CHECK(agent_names(perm->spec()) == std::vector<std::string>{"J2", "J0", "J1"});
  auto a = base->reset(31);
  auto b = perm->reset(31);
  const std::vector<std::size_t> order{2, 0, 1};
  for (std::size_t j = 0; j < 3; ++j) CHECK(b.observations[j] == a.observations[order[j]]);
  CHECK(base->step(a.state, JointVec{{0.2}, {-0.4}, {0.9}}).reward ==
        perm->step(b.state, JointVec{{0.9}, {0.2}, {-0.4}}).reward);
  CHECK_THROWS_AS(make_environment("JointReacher", 3, 20, {0, 0, 1}), ContractViolation);
  CHECK_THROWS_AS(make_environment("Nope", 3, 20), ConfigError);
}
