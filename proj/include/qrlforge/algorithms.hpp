#pragma once

// REINFORCE, DQN and PPO, each written once against the Agent interface.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrlforge/agents.hpp"
#include "qrlforge/envs.hpp"
#include "qrlforge/metrics.hpp"
#include "qrlforge/nn.hpp"
#include "qrlforge/rng.hpp"

namespace qrlforge::algorithms {

// ------------------------------------------------------------------ helpers

// G_t = r_t + gamma * G_{t+1}. Throws ArgumentError on empty input.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

// values holds len(rewards) + 1 entries, the last one being the bootstrap
// value (0 after termination).
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        double gamma, double lambda);

// Linear decay from start to end over decay_fraction * total_steps, then flat.
double epsilon_at(std::uint64_t step, double start, double end, double decay_fraction,
                  std::uint64_t total_steps);

constexpr double kMaskedLogit = -1e9;

// Invalid entries replaced by kMaskedLogit. An empty mask means all valid.
std::vector<double> apply_mask(std::span<const double> values, const std::vector<bool>& mask);
std::vector<double> softmax(std::span<const double> logits);
// Largest valid entry, lowest index on ties. Throws ArgumentError if nothing is valid.
std::size_t masked_argmax(std::span<const double> values, const std::vector<bool>& mask);
std::size_t sample_categorical(std::span<const double> probs, Rng& rng);
std::size_t random_valid_action(const std::vector<bool>& mask, std::size_t n_actions, Rng& rng);

struct Transition {
  std::vector<double> observation;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_observation;
  bool terminated = false;
  std::vector<bool> next_mask;  // valid actions in next_observation; empty = all
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  // Uniform with replacement. nullopt while fewer than batch_size items are stored.
  std::optional<std::vector<const Transition*>> sample(Rng& rng, std::size_t batch_size) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

struct Trajectory {
  std::vector<std::vector<double>> observations;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<std::vector<bool>> masks;
  std::vector<double> log_probs;
  std::vector<double> values;

  std::size_t size() const noexcept { return actions.size(); }
};

// ------------------------------------------------------------------ updates

// Optimizer state bound to one agent's parameter vector.
struct Optimizer {
  nn::AdamState adam;
  double max_grad_norm = 0.0;  // 0 disables clipping

  Optimizer() = default;
  Optimizer(const agents::Agent& agent, const agents::LearningRates& rates, double max_norm = 0.0)
      : adam(agents::learning_rate_vector(agent, rates)), max_grad_norm(max_norm) {}

  void step(agents::Agent& agent, std::span<double> grad);
};

enum class Baseline { None, Mean };

Baseline parse_baseline(const std::string& name);

// Per-step advantages for a batch of trajectories: discounted returns,
// normalized by batch mean and std when baseline is Mean.
std::vector<std::vector<double>> reinforce_advantages(const std::vector<Trajectory>& batch,
                                                      double gamma, Baseline baseline);

// Minimizes -mean_t log pi(a_t|s_t) * A_t with one optimizer step. Returns the loss.
double reinforce_update(agents::Agent& agent, const std::vector<Trajectory>& batch, double gamma,
                        Baseline baseline, Optimizer& optimizer);

// Bootstrap target r + gamma * max over valid next actions of the target net.
double dqn_target(agents::Agent& target, const Transition& t, double gamma);

double huber(double x, double delta = 1.0);

// Mean Huber loss of Q(s,a) - y over the batch, one optimizer step on online.
double dqn_update(agents::Agent& online, agents::Agent& target,
                  std::span<const Transition* const> batch, double gamma, Optimizer& optimizer);

struct PpoParams {
  std::size_t num_steps = 512;
  std::size_t epochs = 4;
  std::size_t minibatch_size = 128;
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  bool normalize_advantages = true;
};

struct Rollout {
  std::vector<std::vector<double>> observations;
  std::vector<std::size_t> actions;
  std::vector<std::vector<bool>> masks;
  std::vector<double> log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const noexcept { return actions.size(); }
};

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double total_loss = 0.0;
  // Largest |ratio - 1| seen on the first minibatch of the first epoch.
  double first_ratio_deviation = 0.0;
};

double clipped_objective(double ratio, double advantage, double clip);

PpoStats ppo_update(agents::Agent& agent, const Rollout& rollout, const PpoParams& params,
                    Optimizer& optimizer, Rng& rng);

// ----------------------------------------------------------------- training

enum class Algorithm { Reinforce, Dqn, Ppo };

Algorithm parse_algorithm(const std::string& name);
const char* algorithm_name(Algorithm a) noexcept;
agents::HeadKind head_for(Algorithm a) noexcept;

struct DqnParams {
  double gamma = 0.99;
  std::size_t buffer_size = 10000;
  std::size_t batch_size = 32;
  std::size_t learning_starts = 1000;
  std::size_t train_frequency = 1;
  std::size_t target_sync_interval = 100;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;
  // Steps over which the decay fraction is measured; 0 means total_timesteps.
  std::uint64_t epsilon_horizon = 0;
};

struct ReinforceParams {
  double gamma = 0.99;
  Baseline baseline = Baseline::Mean;
  std::size_t batch_episodes = 1;
};

struct TrainSpec {
  Algorithm algorithm = Algorithm::Dqn;
  std::optional<std::uint64_t> total_timesteps;
  std::optional<std::uint64_t> total_episodes;
  agents::LearningRates learning_rates;
  double max_grad_norm = 0.0;
  bool anneal_lr = false;
  DqnParams dqn;
  ReinforceParams reinforce;
  PpoParams ppo;

  // Stop once the trailing-window mean return reaches this value.
  std::optional<double> stop_mean_return;
  // Greedy evaluation every eval_interval episodes on the evaluation
  // environment; training stops once the mean evaluation return reaches
  // eval_stop_return.
  std::size_t eval_interval = 0;
  std::size_t eval_episodes = 100;
  std::optional<double> eval_stop_return;
};

struct TrainStreams {
  std::uint64_t env_seed = 0;
  std::uint64_t exploration_seed = 0;
  std::uint64_t replay_seed = 0;
  std::uint64_t evaluation_seed = 0;
};

struct EvalPoint {
  std::uint64_t episode = 0;
  std::uint64_t global_step = 0;
  double mean_return = 0.0;
};

struct TrainResult {
  std::uint64_t episodes = 0;
  std::uint64_t env_steps = 0;
  std::uint64_t updates = 0;
  std::uint64_t circuit_executions = 0;
  double final_return_mean = 0.0;
  double wall_time_s = 0.0;
  std::string stop_reason;
  std::vector<EvalPoint> evaluations;
};

// Runs the configured loop until the step or episode budget (or a stop
// condition) is reached, writing one record per finished episode.
// Evaluation runs on a counter-less clone of the agent.
TrainResult train(const TrainSpec& spec, envs::Environment& env, agents::Agent& agent,
                  const TrainStreams& streams, metrics::JsonlSink& sink,
                  const metrics::ExecutionCounter& counter, envs::Environment* eval_env = nullptr);

// Greedy rollouts; returns one total reward per episode. The first reset
// uses `seed`.
std::vector<double> evaluate_greedy(envs::Environment& env, agents::Agent& agent,
                                    std::size_t episodes, std::uint64_t seed);

}  // namespace qrlforge::algorithms
