#include <cmath>
#include <string>

#include "qrlforge/envs.hpp"
#include "qrlforge/error.hpp"

namespace qrlforge::envs {

std::vector<bool> Environment::action_mask() const {
  return std::vector<bool>(space().action_count, true);
}

// --------------------------------------------------------------- CartPole

SpaceDescriptor CartPole::space() const {
  SpaceDescriptor s;
  s.observation_dim = 4;
  s.action_count = 2;
  s.kind = ObservationKind::Continuous;
  s.bounds = {DimRange{-kXThreshold, kXThreshold}, std::nullopt,
              DimRange{-kThetaThreshold, kThetaThreshold}, std::nullopt};
  return s;
}

std::vector<double> CartPole::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  state_.x = rng_.uniform(-0.05, 0.05);
  state_.x_dot = rng_.uniform(-0.05, 0.05);
  state_.theta = rng_.uniform(-0.05, 0.05);
  state_.theta_dot = rng_.uniform(-0.05, 0.05);
  steps_ = 0;
  done_ = false;
  return {state_.x, state_.x_dot, state_.theta, state_.theta_dot};
}

void CartPole::set_state(const CartPoleState& s) {
  state_ = s;
  steps_ = 0;
  done_ = false;
}

StepResult CartPole::step(std::size_t action) {
  if (done_) throw ProtocolError("cartpole: step called after the episode ended");
  if (action > 1) throw InvalidActionError("cartpole: action " + std::to_string(action) + " invalid");

  constexpr double total_mass = kCartMass + kPoleMass;
  constexpr double polemass_length = kPoleMass * kHalfLength;

  const double force = action == 1 ? force_ : -force_;
  const double cos_t = std::cos(state_.theta);
  const double sin_t = std::sin(state_.theta);
  const double temp = (force + polemass_length * state_.theta_dot * state_.theta_dot * sin_t) / total_mass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

  state_.x += kTau * state_.x_dot;
  state_.x_dot += kTau * x_acc;
  state_.theta += kTau * state_.theta_dot;
  state_.theta_dot += kTau * theta_acc;
  ++steps_;

  StepResult r;
  r.observation = {state_.x, state_.x_dot, state_.theta, state_.theta_dot};
  r.reward = 1.0;
  r.terminated = std::abs(state_.x) > kXThreshold || std::abs(state_.theta) > kThetaThreshold;
  r.truncated = !r.terminated && steps_ >= kMaxSteps;
  done_ = r.done();
  return r;
}

// ------------------------------------------------------------- FrozenLake

SpaceDescriptor FrozenLake::space() const {
  SpaceDescriptor s;
  s.observation_dim = 1;
  s.action_count = 4;
  s.kind = ObservationKind::DiscreteIndex;
  s.n_states = 16;
  return s;
}

char FrozenLake::tile(std::size_t state) {
  if (state >= 16) throw IndexError("frozenlake: state " + std::to_string(state) + " out of range");
  return kMap[state / 4][state % 4];
}

void FrozenLake::set_position(std::size_t s) {
  tile(s);
  pos_ = s;
  steps_ = 0;
  done_ = false;
}

std::vector<double> FrozenLake::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  pos_ = 0;
  steps_ = 0;
  done_ = false;
  return {0.0};
}

std::size_t FrozenLake::move(std::size_t s, std::size_t action) const {
  std::size_t row = s / 4, col = s % 4;
  switch (action) {
    case Left: col = col > 0 ? col - 1 : col; break;
    case Down: row = row < 3 ? row + 1 : row; break;
    case Right: col = col < 3 ? col + 1 : col; break;
    case Up: row = row > 0 ? row - 1 : row; break;
    default: break;
  }
  return row * 4 + col;
}

StepResult FrozenLake::step(std::size_t action) {
  if (done_) throw ProtocolError("frozenlake: step called after the episode ended");
  if (action > 3) throw InvalidActionError("frozenlake: action " + std::to_string(action) + " invalid");

  std::size_t taken = action;
  if (slippery_) {
    // Intended direction or one of the two perpendicular ones, equally likely.
    const auto k = rng_.below(3);
    taken = (action + 3 + k) % 4;
  }
  pos_ = move(pos_, taken);
  ++steps_;

  const char t = tile(pos_);
  StepResult r;
  r.observation = {static_cast<double>(pos_)};
  r.reward = t == 'G' ? 1.0 : 0.0;
  r.terminated = t == 'G' || t == 'H';
  r.truncated = !r.terminated && steps_ >= kMaxSteps;
  done_ = r.done();
  return r;
}

// -------------------------------------------------------------------- TSP

Tsp::Tsp(int n_cities) : n_(n_cities) {
  if (n_cities < 2) throw ArgumentError("tsp needs at least 2 cities");
}

SpaceDescriptor Tsp::space() const {
  const auto n = static_cast<std::size_t>(n_);
  SpaceDescriptor s;
  s.observation_dim = n * (n - 1) / 2 + 2 * n;
  s.action_count = n;
  s.kind = ObservationKind::Graph;
  s.problem = "tsp";
  s.problem_size = n;
  return s;
}

void Tsp::set_instance(std::vector<Point> cities) {
  if (cities.size() != static_cast<std::size_t>(n_)) {
    throw ArgumentError("tsp instance has " + std::to_string(cities.size()) + " cities, expected " +
                        std::to_string(n_));
  }
  fixed_ = std::move(cities);
}

double Tsp::distance(std::size_t a, std::size_t b) const {
  return std::hypot(cities_[a].x - cities_[b].x, cities_[a].y - cities_[b].y);
}

std::vector<double> Tsp::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  if (fixed_) {
    cities_ = *fixed_;
  } else {
    cities_.resize(static_cast<std::size_t>(n_));
    for (auto& c : cities_) {
      c.x = rng_.uniform();
      c.y = rng_.uniform();
    }
  }
  visited_.assign(static_cast<std::size_t>(n_), false);
  visited_[0] = true;
  current_ = 0;
  steps_ = 0;
  done_ = false;
  return observe();
}

std::vector<double> Tsp::observe() const {
  const auto n = static_cast<std::size_t>(n_);
  std::vector<double> obs;
  obs.reserve(space().observation_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) obs.push_back(distance(i, j));
  }
  for (std::size_t i = 0; i < n; ++i) obs.push_back(visited_[i] ? 0.0 : 1.0);
  for (std::size_t i = 0; i < n; ++i) obs.push_back(i == current_ ? 1.0 : 0.0);
  return obs;
}

std::vector<bool> Tsp::action_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(n_));
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = !done_ && !visited_[i];
  return mask;
}

StepResult Tsp::step(std::size_t action) {
  if (done_) throw ProtocolError("tsp: step called after the episode ended");
  if (action >= static_cast<std::size_t>(n_)) {
    throw InvalidActionError("tsp: city " + std::to_string(action) + " out of range");
  }
  if (visited_[action]) {
    throw InvalidActionError("tsp: city " + std::to_string(action) + " already visited");
  }
  StepResult r;
  r.reward = -distance(current_, action);
  visited_[action] = true;
  current_ = action;
  ++steps_;

  bool all = true;
  for (bool v : visited_) all = all && v;
  if (all) {
    r.reward -= distance(current_, 0);
    r.terminated = true;
  }
  r.truncated = !r.terminated && steps_ >= static_cast<std::size_t>(n_);
  done_ = r.done();
  r.observation = observe();
  return r;
}

// --------------------------------------------------------------- Knapsack

Knapsack::Knapsack(int n_items, double penalty) : n_(n_items), penalty_(penalty) {
  if (n_items < 1) throw ArgumentError("knapsack needs at least one item");
  if (!(penalty > 0.0)) throw ArgumentError("knapsack penalty must be positive");
}

SpaceDescriptor Knapsack::space() const {
  const auto n = static_cast<std::size_t>(n_);
  SpaceDescriptor s;
  s.observation_dim = 3 * n + 1;
  s.action_count = n + 1;
  s.kind = ObservationKind::Continuous;
  s.problem = "knapsack";
  s.problem_size = n;
  s.bounds.assign(s.observation_dim, DimRange{0.0, 1.0});
  s.bounds.back() = std::nullopt;
  return s;
}

void Knapsack::set_instance(std::vector<double> values, std::vector<double> weights, double capacity) {
  if (values.size() != static_cast<std::size_t>(n_) || weights.size() != values.size()) {
    throw ArgumentError("knapsack instance size mismatch");
  }
  values_ = std::move(values);
  weights_ = std::move(weights);
  capacity_ = capacity;
  fixed_ = true;
}

std::vector<double> Knapsack::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  if (!fixed_) {
    const auto n = static_cast<std::size_t>(n_);
    values_.resize(n);
    weights_.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      values_[i] = 1.0 - rng_.uniform();
      weights_[i] = 1.0 - rng_.uniform();
      total += weights_[i];
    }
    capacity_ = total / 2.0;
  }
  taken_.assign(static_cast<std::size_t>(n_), false);
  load_ = 0.0;
  steps_ = 0;
  done_ = false;
  return observe();
}

std::vector<double> Knapsack::observe() const {
  std::vector<double> obs;
  obs.reserve(3 * values_.size() + 1);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    obs.push_back(values_[i]);
    obs.push_back(weights_[i]);
    obs.push_back(taken_[i] ? 1.0 : 0.0);
  }
  obs.push_back(capacity_ - load_);
  return obs;
}

std::vector<bool> Knapsack::action_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(n_) + 1, !done_);
  for (std::size_t i = 0; i < taken_.size(); ++i) mask[i] = !done_ && !taken_[i];
  return mask;
}

StepResult Knapsack::step(std::size_t action) {
  if (done_) throw ProtocolError("knapsack: step called after the episode ended");
  if (action > stop_action()) {
    throw InvalidActionError("knapsack: action " + std::to_string(action) + " out of range");
  }
  StepResult r;
  ++steps_;
  if (action == stop_action()) {
    r.terminated = true;
  } else {
    if (taken_[action]) {
      --steps_;
      throw InvalidActionError("knapsack: item " + std::to_string(action) + " already taken");
    }
    taken_[action] = true;
    load_ += weights_[action];
    if (load_ <= capacity_) {
      r.reward = values_[action];
    } else {
      r.reward = -penalty_;
      r.terminated = true;
    }
  }
  r.truncated = !r.terminated && steps_ >= static_cast<std::size_t>(n_) + 1;
  done_ = r.done();
  r.observation = observe();
  return r;
}

}  // namespace qrlforge::envs
