#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "qrlforge/rng.hpp"

namespace qrlforge::envs {

enum class ObservationKind { Continuous, DiscreteIndex, Graph };
enum class ActionKind { Discrete, Continuous };

struct DimRange {
  double low = 0.0;
  double high = 0.0;
};

struct SpaceDescriptor {
  std::size_t observation_dim = 0;
  std::size_t action_count = 0;
  ObservationKind kind = ObservationKind::Continuous;
  ActionKind action_kind = ActionKind::Discrete;
  // DiscreteIndex only: number of states.
  std::size_t n_states = 0;
  // Continuous only: finite range per dimension, nullopt when unbounded.
  std::vector<std::optional<DimRange>> bounds;
  // Structured problems ("tsp", "knapsack") and their size.
  std::string problem;
  std::size_t problem_size = 0;
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;

  bool done() const noexcept { return terminated || truncated; }
};

// reset/step contract. The first reset of a trial passes a seed; later
// resets continue the environment's own random stream.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual SpaceDescriptor space() const = 0;
  virtual std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) = 0;
  // Throws ProtocolError once the episode has ended, InvalidActionError for
  // actions that are out of range or masked.
  virtual StepResult step(std::size_t action) = 0;
  // Valid actions in the current state; all true unless overridden.
  virtual std::vector<bool> action_mask() const;
};

// ---------------------------------------------------------------------------

struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
};

class CartPole final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kXThreshold = 2.4;
  static constexpr double kThetaThreshold = 12.0 * 2.0 * M_PI / 360.0;
  static constexpr std::size_t kMaxSteps = 500;

  std::string id() const override { return "cartpole"; }
  SpaceDescriptor space() const override;
  std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
  StepResult step(std::size_t action) override;

  // Test hooks.
  void set_state(const CartPoleState& s);
  const CartPoleState& state() const noexcept { return state_; }
  void set_force_magnitude(double f) noexcept { force_ = f; }

 private:
  Rng rng_;
  CartPoleState state_;
  double force_ = kForce;
  std::size_t steps_ = 0;
  bool done_ = true;
};

class FrozenLake final : public Environment {
 public:
  enum Action : std::size_t { Left = 0, Down = 1, Right = 2, Up = 3 };
  static constexpr std::size_t kMaxSteps = 100;
  static constexpr std::array<const char*, 4> kMap = {"SFFF", "FHFH", "FFFH", "HFFG"};

  explicit FrozenLake(bool slippery = false) : slippery_(slippery) {}

  std::string id() const override { return "frozenlake-4x4"; }
  SpaceDescriptor space() const override;
  std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
  StepResult step(std::size_t action) override;

  static char tile(std::size_t state);
  std::size_t position() const noexcept { return pos_; }
  void set_position(std::size_t s);

 private:
  std::size_t move(std::size_t s, std::size_t action) const;

  bool slippery_;
  Rng rng_;
  std::size_t pos_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Observation: upper-triangular distance matrix, availability bits,
// one-hot current city.
class Tsp final : public Environment {
 public:
  explicit Tsp(int n_cities);

  std::string id() const override { return "tsp-" + std::to_string(n_); }
  SpaceDescriptor space() const override;
  std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
  StepResult step(std::size_t action) override;
  std::vector<bool> action_mask() const override;

  // Resets onto a fixed instance; seeds are ignored until cleared.
  void set_instance(std::vector<Point> cities);
  void clear_instance() { fixed_.reset(); }
  const std::vector<Point>& cities() const noexcept { return cities_; }
  int n_cities() const noexcept { return n_; }

 private:
  std::vector<double> observe() const;
  double distance(std::size_t a, std::size_t b) const;

  int n_;
  Rng rng_;
  std::optional<std::vector<Point>> fixed_;
  std::vector<Point> cities_;
  std::vector<bool> visited_;
  std::size_t current_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;
};

// Actions 0..n-1 take an item, action n stops. Observation: per item
// (value, weight, taken) followed by the remaining capacity.
class Knapsack final : public Environment {
 public:
  explicit Knapsack(int n_items, double penalty = 1.0);

  std::string id() const override { return "knapsack-" + std::to_string(n_); }
  SpaceDescriptor space() const override;
  std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
  StepResult step(std::size_t action) override;
  std::vector<bool> action_mask() const override;

  void set_instance(std::vector<double> values, std::vector<double> weights, double capacity);
  void clear_instance() { fixed_ = false; }
  std::size_t stop_action() const noexcept { return static_cast<std::size_t>(n_); }
  double penalty() const noexcept { return penalty_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double capacity() const noexcept { return capacity_; }

 private:
  std::vector<double> observe() const;

  int n_;
  double penalty_;
  Rng rng_;
  bool fixed_ = false;
  std::vector<double> values_, weights_;
  std::vector<bool> taken_;
  double capacity_ = 0.0;
  double load_ = 0.0;
  std::size_t steps_ = 0;
  bool done_ = true;
};

// ---------------------------------------------------------------------------
// Observation wrappers for angle encoding.

// Bounded dimensions map linearly onto [-pi, pi] (clamped); unbounded ones go
// through arctan into (-pi/2, pi/2).
std::vector<double> wrap_continuous(std::span<const double> observation,
                                    std::span<const std::optional<DimRange>> bounds);

// Binary expansion (most significant bit first) on ceil(log2 n_states) bits,
// each bit b becoming the angle b * pi. Throws IndexError when out of range.
std::vector<double> wrap_discrete_index(std::size_t state_index, std::size_t n_states);

std::size_t discrete_index_bits(std::size_t n_states) noexcept;

enum class WrapperKind { None, Continuous, DiscreteIndex, OneHot };

WrapperKind parse_wrapper(const std::string& name);
const char* wrapper_name(WrapperKind kind) noexcept;

class ObservationWrapper final : public Environment {
 public:
  ObservationWrapper(std::unique_ptr<Environment> inner, WrapperKind kind);

  std::string id() const override { return inner_->id(); }
  SpaceDescriptor space() const override { return space_; }
  std::vector<double> reset(std::optional<std::uint64_t> seed = std::nullopt) override;
  StepResult step(std::size_t action) override;
  std::vector<bool> action_mask() const override { return inner_->action_mask(); }

  Environment& inner() noexcept { return *inner_; }
  std::vector<double> transform(std::span<const double> raw) const;

 private:
  std::unique_ptr<Environment> inner_;
  WrapperKind kind_;
  SpaceDescriptor inner_space_;
  SpaceDescriptor space_;
};

// ---------------------------------------------------------------------------
// Registry. Built-in ids: "cartpole", "frozenlake-4x4", "tsp-<n>",
// "knapsack-<n>". Custom ids may be registered at runtime.

using EnvFactory = std::function<std::unique_ptr<Environment>(const nlohmann::json& params)>;

void register_environment(const std::string& id, EnvFactory factory);
bool is_registered(const std::string& id);
// Throws ConfigError for unknown ids or bad parameters.
std::unique_ptr<Environment> make_environment(const std::string& id,
                                              const nlohmann::json& params = nlohmann::json::object());

}  // namespace qrlforge::envs
