#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

#include "doctest.h"
#include "qrlforge/agents.hpp"
#include "qrlforge/error.hpp"

using namespace qrlforge;
using namespace qrlforge::agents;

namespace {

double scalar(Agent& a, std::span<const double> obs, const OutputGradient& g) {
  const auto out = a.forward(obs);
  double s = 0;
  for (std::size_t k = 0; k < out.values.size(); ++k) s += g.values[k] * out.values[k];
  if (out.state_value) s += g.state_value * *out.state_value;
  return s;
}

// Central differences over every flat parameter.
void check_gradient(Agent& a, std::span<const double> obs, Rng& rng, double tol) {
  OutputGradient g;
  for (std::size_t k = 0; k < a.num_actions(); ++k) g.values.push_back(rng.uniform(-1, 1));
  g.state_value = rng.uniform(-1, 1);
  a.forward(obs);
  const auto analytic = a.gradient(obs, g);
  REQUIRE(analytic.size() == a.parameter_count());
  const double h = 1e-4;
  for (std::size_t i = 0; i < a.parameter_count(); ++i) {
    const double orig = a.parameters()[i];
    a.parameters()[i] = orig + h;
    const double fp = scalar(a, obs, g);
    a.parameters()[i] = orig - h;
    const double fm = scalar(a, obs, g);
    a.parameters()[i] = orig;
    CHECK(std::abs((fp - fm) / (2 * h) - analytic[i]) < tol);
  }
}

std::vector<double> random_obs(std::size_t n, Rng& rng, double lo = -M_PI, double hi = M_PI) {
  std::vector<double> o(n);
  for (auto& x : o) x = rng.uniform(lo, hi);
  return o;
}

envs::SpaceDescriptor continuous_space(std::size_t dim, std::size_t actions) {
  envs::SpaceDescriptor s;
  s.observation_dim = dim;
  s.action_count = actions;
  return s;
}

std::unique_ptr<QuantumAgent> hea_agent(HeadKind head, int q, int l, int a, Rng& rng,
                                        metrics::ExecutionCounter* c = nullptr) {
  std::unique_ptr<CircuitModel> critic;
  if (head == HeadKind::ActorCritic) critic = hardware_efficient_model(q, l, 1);
  QuantumInit init;
  init.lambda = 0.8;
  init.w = 1.3;
  init.beta = 0.7;
  return std::make_unique<QuantumAgent>(head, hardware_efficient_model(q, l, a), std::move(critic),
                                        init, rng, c);
}

// Knapsack observation: (value, weight, taken) per item then capacity.
std::vector<double> knapsack_obs(const std::vector<double>& v, const std::vector<double>& w,
                                 const std::vector<int>& taken, double cap) {
  std::vector<double> o;
  for (std::size_t i = 0; i < v.size(); ++i) {
    o.push_back(v[i]);
    o.push_back(w[i]);
    o.push_back(taken[i]);
  }
  o.push_back(cap);
  return o;
}

}  // namespace

TEST_CASE("classical agents: backprop matches finite differences") {
  Rng rng(1);
  for (auto head : {HeadKind::Value, HeadKind::Policy, HeadKind::ActorCritic}) {
    ClassicalAgent a(head, 4, 3, {8, 5}, rng);
    const auto obs = random_obs(4, rng, -1, 1);
    check_gradient(a, obs, rng, 1e-6);
    CHECK(a.forward(obs).state_value.has_value() == (head == HeadKind::ActorCritic));
  }
}

TEST_CASE("quantum hardware-efficient agents: parameter shift matches finite differences") {
  Rng rng(2);
  for (auto head : {HeadKind::Value, HeadKind::Policy, HeadKind::ActorCritic}) {
    for (int trial = 0; trial < 3; ++trial) {
      auto a = hea_agent(head, 3, 2, 2, rng);
      check_gradient(*a, random_obs(3, rng), rng, 1e-6);
    }
  }
}

TEST_CASE("output scaling") {
  Rng rng(3);
  auto v = hea_agent(HeadKind::Value, 2, 1, 2, rng);
  auto p = hea_agent(HeadKind::Policy, 2, 1, 2, rng);
  const std::vector<double> obs{0.3, -0.2};
  const auto q1 = v->forward(obs).values;
  const auto l1 = p->forward(obs).values;
  // last groups are w (value) and beta (policy)
  auto vg = v->parameter_groups();
  auto pg = p->parameter_groups();
  CHECK(vg.back().name == "actor.w");
  CHECK(pg.back().name == "actor.beta");
  for (std::size_t i = 0; i < vg.back().size; ++i) v->parameters()[vg.back().offset + i] *= 2;
  p->parameters()[pg.back().offset] *= 3;
  const auto q2 = v->forward(obs).values;
  const auto l2 = p->forward(obs).values;
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(q2[k] == doctest::Approx(2 * q1[k]));
    CHECK(l2[k] == doctest::Approx(3 * l1[k]));
  }
}

TEST_CASE("execution accounting: 2P + 1 per forward plus gradient") {
  Rng rng(4);
  for (int q = 1; q <= 4; ++q)
    for (int l = 1; l <= 3; ++l) {
      metrics::ExecutionCounter c;
      auto a = hea_agent(HeadKind::Value, q, l, 1, rng, &c);
      const auto obs = random_obs(static_cast<std::size_t>(q), rng);
      const std::size_t p = a->parameter_occurrences(obs);
      // every RX, RY and RZ gate carries a parameter
      CHECK(p == static_cast<std::size_t>(3 * q * l));
      const auto before = c.count();
      a->forward(obs);
      a->gradient(obs, OutputGradient{{1.0}, 0.0});
      CHECK(c.count() - before == 2 * p + 1);
    }

  SUBCASE("gradient reuses the preceding forward until parameters change") {
    metrics::ExecutionCounter c;
    auto a = hea_agent(HeadKind::Value, 2, 1, 1, rng, &c);
    const std::vector<double> obs{0.1, 0.2};
    const auto p = a->parameter_occurrences(obs);
    a->forward(obs);
    a->gradient(obs, OutputGradient{{1.0}, 0.0});
    CHECK(c.count() == 1 + 2 * p);
    a->parameters()[0] += 0.1;
    a->gradient(obs, OutputGradient{{1.0}, 0.0});
    CHECK(c.count() == 2 * (1 + 2 * p));
    const std::vector<double> other{0.2, 0.1};
    a->gradient(other, OutputGradient{{1.0}, 0.0});
    CHECK(c.count() == 3 * (1 + 2 * p));
  }

  SUBCASE("zero-coefficient gradients still cost 2P") {
    metrics::ExecutionCounter c;
    auto a = hea_agent(HeadKind::Value, 2, 2, 2, rng, &c);
    const std::vector<double> obs{0.4, 0.0};
    a->forward(obs);
    a->gradient(obs, OutputGradient{{0.0, 0.0}, 0.0});
    CHECK(c.count() == 1 + 2 * a->parameter_occurrences(obs));
  }

  SUBCASE("classical agents never count") {
    metrics::ExecutionCounter c;
    ClassicalAgent a(HeadKind::Value, 2, 2, {4}, rng);
    a.set_execution_counter(&c);
    a.forward(std::vector<double>{1, 2});
    CHECK(c.count() == 0);
  }
}

TEST_CASE("tsp graph agent") {
  Rng rng(5);
  const int n = 4;
  const auto ne = ansatz::edge_count(n);
  for (auto head : {HeadKind::Policy, HeadKind::ActorCritic}) {
    std::unique_ptr<CircuitModel> critic;
    if (head == HeadKind::ActorCritic) critic = tsp_graph_model(n, 2, 1);
    QuantumAgent a(head, tsp_graph_model(n, 2, n), std::move(critic), QuantumInit{}, rng, nullptr);
    std::vector<double> obs(ne + 2 * n, 0.0);
    for (std::size_t e = 0; e < ne; ++e) obs[e] = rng.uniform(0.1, 1.4);
    obs[ne + 0] = 0;  // visited, current
    obs[ne + 1] = 1;
    obs[ne + 2] = 0;  // visited
    obs[ne + 3] = 1;
    obs[ne + n + 0] = 1;
    CHECK(a.input_dim() == obs.size());
    check_gradient(a, obs, rng, 1e-6);
  }
}

TEST_CASE("knapsack hamiltonian agent") {
  Rng rng(6);
  const std::vector<double> v{0.5, 0.9, 0.3}, w{0.4, 0.2, 0.7};
  QuantumAgent a(HeadKind::ActorCritic, knapsack_hamiltonian_model(3, 2, 1.5, false),
                 knapsack_hamiltonian_model(3, 2, 1.5, true), QuantumInit{}, rng, nullptr);
  CHECK(a.num_actions() == 4);  // one per item plus STOP
  for (const auto& taken : {std::vector<int>{0, 0, 0}, std::vector<int>{0, 1, 0}}) {
    check_gradient(a, knapsack_obs(v, w, taken, 0.8), rng, 1e-6);
  }

  SUBCASE("taken items are neutralized") {
    // Swapping a taken item's value/weight must not change the outputs.
    const auto o1 = a.forward(knapsack_obs(v, w, {0, 1, 0}, 0.8)).values;
    const auto o2 = a.forward(knapsack_obs({0.5, 0.1, 0.3}, {0.4, 0.9, 0.7}, {0, 1, 0}, 0.8)).values;
    for (std::size_t k = 0; k < o1.size(); ++k) CHECK(o1[k] == doctest::Approx(o2[k]));
  }
}

TEST_CASE("sync and clone") {
  Rng rng(7);
  auto a = hea_agent(HeadKind::Value, 3, 2, 2, rng);
  auto b = hea_agent(HeadKind::Value, 3, 2, 2, rng);
  const std::vector<double> obs{0.1, 0.5, -0.3};
  CHECK(a->forward(obs).values != b->forward(obs).values);
  b->forward(obs);
  sync_parameters(*a, *b);
  CHECK(a->forward(obs).values == b->forward(obs).values);

  auto c = a->clone();
  a->parameters()[0] += 1.0;
  CHECK(c->forward(obs).values != a->forward(obs).values);

  auto d = hea_agent(HeadKind::Value, 3, 1, 2, rng);
  CHECK_THROWS_AS(sync_parameters(*a, *d), ArgumentError);
  ClassicalAgent e(HeadKind::Value, 3, 2, {4}, rng);
  CHECK_THROWS_AS(sync_parameters(*a, e), ArgumentError);
}

TEST_CASE("parameter groups tile the flat vector") {
  Rng rng(8);
  std::vector<std::unique_ptr<Agent>> agents;
  agents.push_back(hea_agent(HeadKind::ActorCritic, 3, 2, 2, rng));
  agents.push_back(std::make_unique<ClassicalAgent>(HeadKind::ActorCritic, 3, 2, std::vector<std::size_t>{5}, rng));
  for (const auto& a : agents) {
    std::size_t next = 0;
    for (const auto& g : a->parameter_groups()) {
      CHECK(g.offset == next);
      next += g.size;
    }
    CHECK(next == a->parameter_count());
  }
  LearningRates r;
  r.theta = 0.1;
  r.lambda = 0.2;
  r.w = 0.3;
  const auto lr = learning_rate_vector(*agents[0], r);
  for (const auto& g : agents[0]->parameter_groups())
    for (std::size_t i = 0; i < g.size; ++i) CHECK(lr[g.offset + i] == r.for_category(g.category));
  CHECK(agents[0]->parameter_groups()[0].name == "actor.theta");
  CHECK(agents[0]->parameter_groups()[1].category == "lambda");
}

TEST_CASE("snapshot round trip") {
  Rng rng(9);
  auto a = hea_agent(HeadKind::Policy, 2, 2, 2, rng);
  auto b = hea_agent(HeadKind::Policy, 2, 2, 2, rng);
  const auto dir = std::filesystem::temp_directory_path() / "qrlforge_test_agents";
  std::filesystem::create_directories(dir);
  save_parameters(*a, dir / "p.json");
  load_parameters(*b, dir / "p.json");
  CHECK(std::vector<double>(a->parameters().begin(), a->parameters().end()) ==
        std::vector<double>(b->parameters().begin(), b->parameters().end()));

  auto snap = parameter_snapshot(*a);
  snap["actor.theta"].push_back(0.0);
  CHECK_THROWS_AS(load_parameter_snapshot(*b, snap), ArgumentError);
  std::ofstream(dir / "other.json") << nlohmann::json{{"architecture", "quantum/value/other"},
                                                      {"parameters", parameter_snapshot(*a)}}
                                           .dump();
  CHECK_THROWS_AS(load_parameters(*b, dir / "other.json"), ArgumentError);
  CHECK_THROWS(load_parameters(*b, dir / "missing.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("factory") {
  Rng rng(10);
  SUBCASE("classical") {
    AgentOptions o;
    o.hidden_sizes = {16};
    auto a = make_agent(o, continuous_space(4, 2), rng, 0, nullptr);
    CHECK(a->kind() == "classical");
    CHECK(a->num_actions() == 2);
  }
  SUBCASE("quantum derives qubits from the observation") {
    AgentOptions o;
    o.kind = "quantum";
    auto a = make_agent(o, continuous_space(4, 2), rng, 0, nullptr);
    CHECK(a->kind() == "quantum");
    CHECK(a->input_dim() == 4);
  }
  SUBCASE("errors") {
    AgentOptions o;
    o.kind = "quantum";
    o.n_qubits = 3;
    CHECK_THROWS_AS(make_agent(o, continuous_space(4, 2), rng, 0, nullptr), ConfigError);
    o.n_qubits = 0;
    CHECK_THROWS_AS(make_agent(o, continuous_space(2, 3), rng, 0, nullptr), ConfigError);
    o.kind = "tensor";
    CHECK_THROWS_AS(make_agent(o, continuous_space(2, 2), rng, 0, nullptr), ConfigError);
    envs::SpaceDescriptor raw;
    raw.observation_dim = 1;
    raw.action_count = 4;
    raw.kind = envs::ObservationKind::DiscreteIndex;
    raw.n_states = 16;
    o.kind = "quantum";
    CHECK_THROWS_AS(make_agent(o, raw, rng, 0, nullptr), ConfigError);
  }
  SUBCASE("auto ansatz") {
    envs::SpaceDescriptor s;
    s.problem = "tsp";
    CHECK(resolve_ansatz("auto", s) == "graph");
    s.problem = "knapsack";
    CHECK(resolve_ansatz("auto", s) == "hamiltonian");
    s.problem.clear();
    CHECK(resolve_ansatz("auto", s) == "hardware_efficient");
  }
}

TEST_CASE("finite shots are reproducible per seed") {
  Rng r1(11), r2(11);
  metrics::ExecutionCounter c;
  QuantumAgent a(HeadKind::Value, hardware_efficient_model(2, 1, 2), nullptr, QuantumInit{}, r1, &c, 100, 5);
  QuantumAgent b(HeadKind::Value, hardware_efficient_model(2, 1, 2), nullptr, QuantumInit{}, r2, &c, 100, 5);
  const std::vector<double> obs{0.3, 0.9};
  CHECK(a.forward(obs).values == b.forward(obs).values);
}
