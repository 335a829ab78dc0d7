#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "qrlforge/envs.hpp"
#include "qrlforge/error.hpp"

using namespace qrlforge;
using namespace qrlforge::envs;

namespace {

// Reference cart-pole Euler step, written out from the equations of motion.
CartPoleState reference_step(const CartPoleState& s, double force) {
  const double g = 9.8, mc = 1.0, mp = 0.1, l = 0.5, tau = 0.02;
  const double total = mc + mp, pml = mp * l;
  const double c = std::cos(s.theta), sn = std::sin(s.theta);
  const double temp = (force + pml * s.theta_dot * s.theta_dot * sn) / total;
  const double theta_acc = (g * sn - c * temp) / (l * (4.0 / 3.0 - mp * c * c / total));
  const double x_acc = temp - pml * theta_acc * c / total;
  return {s.x + tau * s.x_dot, s.x_dot + tau * x_acc, s.theta + tau * s.theta_dot,
          s.theta_dot + tau * theta_acc};
}

double tour_reward(Tsp& env, const std::vector<std::size_t>& order) {
  env.reset();
  double total = 0;
  for (auto c : order) total += env.step(c).reward;
  return total;
}

}  // namespace

TEST_CASE("cartpole dynamics") {
  CartPole env;
  env.reset(1);
  env.set_state({0, 0, 0, 0});
  auto r = env.step(1);
  CHECK(r.observation[0] == doctest::Approx(0.0));
  CHECK(r.observation[1] == doctest::Approx(0.19512).epsilon(1e-4));
  CHECK(r.observation[2] == doctest::Approx(0.0));
  CHECK(r.observation[3] == doctest::Approx(-0.29268).epsilon(1e-4));
  CHECK(r.reward == 1.0);
  CHECK_FALSE(r.done());

  env.reset(1);
  env.set_state({0, 0, 0, 0});
  auto m = env.step(0);
  for (int i = 0; i < 4; ++i) CHECK(m.observation[i] == doctest::Approx(-r.observation[i]));

  SUBCASE("matches the reference integrator from random states") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      CartPoleState s{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-0.15, 0.15), rng.uniform(-1, 1)};
      const std::size_t a = rng.below(2);
      env.reset(1);
      env.set_state(s);
      const auto out = env.step(a);
      const auto ref = reference_step(s, a == 1 ? 10.0 : -10.0);
      CHECK(out.observation[0] == doctest::Approx(ref.x));
      CHECK(out.observation[1] == doctest::Approx(ref.x_dot));
      CHECK(out.observation[2] == doctest::Approx(ref.theta));
      CHECK(out.observation[3] == doctest::Approx(ref.theta_dot));
    }
  }
}

TEST_CASE("cartpole termination and truncation") {
  CartPole env;
  env.reset(2);
  env.set_state({0, 0, 13.0 * M_PI / 180.0, 0});
  auto r = env.step(0);
  CHECK(r.terminated);
  CHECK_FALSE(r.truncated);
  CHECK_THROWS_AS(env.step(0), ProtocolError);

  env.reset(2);
  env.set_state({2.5, 0, 0, 0});
  CHECK(env.step(1).terminated);

  // Zero force keeps the pole upright forever only from the exact rest state.
  env.reset(2);
  env.set_force_magnitude(0.0);
  env.set_state({0, 0, 0, 0});
  StepResult last;
  int steps = 0;
  do {
    last = env.step(steps % 2);
    ++steps;
  } while (!last.done());
  CHECK(steps == 500);
  CHECK(last.truncated);
  CHECK_FALSE(last.terminated);

  CHECK_THROWS_AS(CartPole().step(0), ProtocolError);
  env.reset(2);
  CHECK_THROWS_AS(env.step(2), InvalidActionError);
}

TEST_CASE("cartpole zero force: tilted pole keeps falling") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    CartPole env;
    env.reset(5);
    env.set_force_magnitude(0.0);
    double theta = rng.uniform(-0.1, 0.1);
    if (theta == 0.0) theta = 0.01;
    env.set_state({0, 0, theta, 0});
    double prev = std::abs(theta);
    for (int k = 0; k < 10; ++k) {
      const auto r = env.step(0);
      CHECK(std::abs(r.observation[2]) >= prev);
      prev = std::abs(r.observation[2]);
      if (r.done()) break;
    }
  }
}

TEST_CASE("reset determinism") {
  for (const char* id : {"cartpole", "frozenlake-4x4", "tsp-5", "knapsack-6"}) {
    auto a = make_environment(id);
    auto b = make_environment(id);
    CHECK(a->reset(42) == b->reset(42));
    if (std::string(id) != "frozenlake-4x4") CHECK(a->reset(43) != b->reset(42));
  }
  CartPole c;
  const auto o = c.reset(9);
  for (double v : o) CHECK(std::abs(v) <= 0.05);
}

TEST_CASE("frozenlake") {
  CHECK(FrozenLake::tile(5) == 'H');
  CHECK(FrozenLake::tile(15) == 'G');
  CHECK_THROWS_AS(FrozenLake::tile(16), IndexError);
  FrozenLake env;
  CHECK(env.reset(1) == std::vector<double>{0.0});
  auto r = env.step(FrozenLake::Left);
  CHECK(r.observation[0] == 0.0);
  CHECK(r.reward == 0.0);
  CHECK_FALSE(r.done());

  env.set_position(14);
  r = env.step(FrozenLake::Right);
  CHECK(r.observation[0] == 15.0);
  CHECK(r.reward == 1.0);
  CHECK(r.terminated);
  CHECK_THROWS_AS(env.step(0), ProtocolError);

  env.reset();
  env.set_position(1);
  r = env.step(FrozenLake::Down);
  CHECK(r.observation[0] == 5.0);
  CHECK(r.terminated);
  CHECK(r.reward == 0.0);

  env.reset();
  int n = 0;
  do {
    r = env.step(FrozenLake::Up);
    ++n;
  } while (!r.done());
  CHECK(n == 100);
  CHECK(r.truncated);
  CHECK_FALSE(r.terminated);

  env.reset();
  CHECK_THROWS_AS(env.step(4), InvalidActionError);
}

TEST_CASE("tsp") {
  Tsp env(4);
  env.set_instance({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const auto obs = env.reset();
  const auto ne = static_cast<std::size_t>(6);
  CHECK(obs.size() == ne + 8);
  CHECK(obs[ne + 0] == 0.0);  // start city visited
  CHECK(obs[ne + 4] == 1.0);  // current city one-hot
  CHECK(env.action_mask() == std::vector<bool>{false, true, true, true});

  double best = -1e9;
  std::vector<std::size_t> perm{1, 2, 3};
  do best = std::max(best, tour_reward(env, perm));
  while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(best == doctest::Approx(-4.0));

  env.reset();
  env.step(2);
  CHECK_THROWS_AS(env.step(2), InvalidActionError);
  CHECK_THROWS_AS(env.step(0), InvalidActionError);

  SUBCASE("n = 5: best permutation equals the exhaustive optimum") {
    Tsp t(5);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      t.clear_instance();
      t.reset(seed);
      const auto pts = t.cities();
      t.set_instance(pts);
      auto d = [&](std::size_t a, std::size_t b) {
        return std::hypot(pts[a].x - pts[b].x, pts[a].y - pts[b].y);
      };
      std::vector<std::size_t> p{1, 2, 3, 4};
      double oracle = 1e9, env_best = -1e9;
      do {
        double len = d(0, p[0]) + d(p[3], 0);
        for (int i = 0; i < 3; ++i) len += d(p[i], p[i + 1]);
        oracle = std::min(oracle, len);
        env_best = std::max(env_best, tour_reward(t, p));
      } while (std::next_permutation(p.begin(), p.end()));
      CHECK(env_best == doctest::Approx(-oracle));
    }
  }

  SUBCASE("episode reward equals minus the closed tour length") {
    Tsp t(5);
    Rng rng(8);
    for (int ep = 0; ep < 100; ++ep) {
      t.reset(static_cast<std::uint64_t>(ep) + 100);
      const auto pts = t.cities();
      std::vector<std::size_t> order;
      double total = 0;
      StepResult r;
      int steps = 0;
      do {
        const auto mask = t.action_mask();
        std::vector<std::size_t> valid;
        for (std::size_t i = 0; i < mask.size(); ++i)
          if (mask[i]) valid.push_back(i);
        const auto a = valid[rng.below(valid.size())];
        order.push_back(a);
        r = t.step(a);
        total += r.reward;
        ++steps;
      } while (!r.done());
      CHECK(r.terminated);
      CHECK(steps <= 5);
      double len = 0;
      std::size_t prev = 0;
      for (auto c : order) {
        len += std::hypot(pts[prev].x - pts[c].x, pts[prev].y - pts[c].y);
        prev = c;
      }
      len += std::hypot(pts[prev].x - pts[0].x, pts[prev].y - pts[0].y);
      CHECK(total == doctest::Approx(-len));
    }
  }
}

TEST_CASE("knapsack") {
  Knapsack env(2);
  env.set_instance({2, 3}, {1, 2}, 2);
  const auto obs = env.reset();
  CHECK(obs == std::vector<double>{2, 1, 0, 3, 2, 0, 2});

  // exhaustive over action sequences
  double best = -1e9;
  std::vector<std::vector<std::size_t>> seqs{{2}, {0, 2}, {1, 2}, {0, 1}, {1, 0}, {0, 1, 2}, {1, 0, 2}};
  for (const auto& seq : seqs) {
    env.reset();
    double total = 0;
    for (auto a : seq) {
      const auto r = env.step(a);
      total += r.reward;
      if (r.done()) break;
    }
    best = std::max(best, total);
  }
  CHECK(best == doctest::Approx(3.0));

  env.reset();
  auto r = env.step(env.stop_action());
  CHECK(r.reward == 0.0);
  CHECK(r.terminated);

  env.reset();
  env.step(0);
  CHECK_THROWS_AS(env.step(0), InvalidActionError);
  r = env.step(1);  // weight 3 > 2
  CHECK(r.reward == -1.0);
  CHECK(r.terminated);
  CHECK_THROWS_AS(env.step(1), ProtocolError);

  SUBCASE("random instances: capacity is half the total weight") {
    Knapsack k(6);
    for (std::uint64_t s = 1; s <= 20; ++s) {
      k.clear_instance();
      const auto o = k.reset(s);
      const double total = std::accumulate(k.weights().begin(), k.weights().end(), 0.0);
      CHECK(k.capacity() == doctest::Approx(total / 2));
      CHECK(o.back() == doctest::Approx(total / 2));
      for (double v : k.values()) CHECK((v > 0 && v <= 1));
    }
  }
  SUBCASE("truncation at n_items + 1 cannot precede termination") {
    Knapsack k(3);
    k.set_instance({1, 1, 1}, {0.1, 0.1, 0.1}, 1.0);
    k.reset();
    k.step(0);
    k.step(1);
    k.step(2);
    CHECK(k.step(k.stop_action()).done());
  }
}

TEST_CASE("wrappers") {
  const std::vector<std::optional<DimRange>> bounds{DimRange{-2.4, 2.4}, std::nullopt};
  auto w = wrap_continuous(std::vector<double>{2.4, 1.0}, bounds);
  CHECK(w[0] == doctest::Approx(M_PI));
  CHECK(w[1] == doctest::Approx(0.785398).epsilon(1e-6));
  w = wrap_continuous(std::vector<double>{0.0, 0.0}, bounds);
  CHECK(w == std::vector<double>{0.0, 0.0});

  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const auto o = wrap_continuous(std::vector<double>{rng.uniform(-10, 10), rng.uniform(-1e6, 1e6)}, bounds);
    for (double v : o) CHECK((v >= -M_PI && v <= M_PI));
  }

  CHECK(wrap_discrete_index(5, 16) == std::vector<double>{0, M_PI, 0, M_PI});
  CHECK(wrap_discrete_index(0, 16) == std::vector<double>{0, 0, 0, 0});
  CHECK_THROWS_AS(wrap_discrete_index(16, 16), IndexError);
  CHECK(discrete_index_bits(5) == 3);
  std::set<std::vector<double>> seen;
  for (std::size_t s = 0; s < 16; ++s) seen.insert(wrap_discrete_index(s, 16));
  CHECK(seen.size() == 16);

  ObservationWrapper fl(make_environment("frozenlake-4x4"), WrapperKind::DiscreteIndex);
  CHECK(fl.space().observation_dim == 4);
  CHECK(fl.reset(1) == std::vector<double>{0, 0, 0, 0});
  ObservationWrapper oh(make_environment("frozenlake-4x4"), WrapperKind::OneHot);
  CHECK(oh.space().observation_dim == 16);
  CHECK_THROWS_AS(oh.step(2), ProtocolError);
  oh.reset(1);
  const auto moved = oh.step(2).observation;
  CHECK(moved[1] == 1.0);
  CHECK(std::accumulate(moved.begin(), moved.end(), 0.0) == 1.0);
}

TEST_CASE("wrapper misuse") {
  CHECK_THROWS_AS(ObservationWrapper(make_environment("cartpole"), WrapperKind::DiscreteIndex), ConfigError);
  CHECK_THROWS_AS(ObservationWrapper(make_environment("frozenlake-4x4"), WrapperKind::Continuous), ConfigError);
  CHECK(parse_wrapper("discrete") == WrapperKind::DiscreteIndex);
  CHECK_THROWS_AS(parse_wrapper("fourier"), ConfigError);
}

TEST_CASE("registry") {
  CHECK(is_registered("cartpole"));
  CHECK(is_registered("tsp-5"));
  CHECK_FALSE(is_registered("pendulum"));
  CHECK_THROWS_AS(make_environment("pendulum"), ConfigError);
  CHECK(make_environment("knapsack-6")->space().action_count == 7);
  CHECK(make_environment("tsp-4")->space().kind == ObservationKind::Graph);

  register_environment("bandit-test", [](const nlohmann::json&) { return make_environment("cartpole"); });
  CHECK(is_registered("bandit-test"));
  CHECK(make_environment("bandit-test")->id() == "cartpole");
  CHECK_THROWS_AS(make_environment("frozenlake-4x4", nlohmann::json{{"slippery", "yes"}}), ConfigError);
}

TEST_CASE("slippery frozenlake stays on the grid") {
  auto env = make_environment("frozenlake-4x4", nlohmann::json{{"slippery", true}});
  env->reset(3);
  std::set<double> visited;
  for (int ep = 0; ep < 50; ++ep) {
    env->reset();
    StepResult r;
    do {
      r = env->step(2);
      visited.insert(r.observation[0]);
    } while (!r.done());
  }
  for (double s : visited) CHECK((s >= 0 && s < 16));
  CHECK(visited.size() > 3);
}
