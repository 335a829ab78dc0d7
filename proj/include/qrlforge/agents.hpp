#pragma once

// One contract for every function approximator. Algorithms only ever see
// Agent; whether a neural network or a parametrized circuit sits behind it is
// decided once, at construction.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrlforge/ansatz.hpp"
#include "qrlforge/envs.hpp"
#include "qrlforge/execution_counter.hpp"
#include "qrlforge/nn.hpp"
#include "qrlforge/qsim.hpp"
#include "qrlforge/rng.hpp"

namespace qrlforge::agents {

// Value: outputs are Q-values. Policy: outputs are unnormalized logits.
// ActorCritic: logits plus a state-value estimate.
enum class HeadKind { Value, Policy, ActorCritic };

const char* head_name(HeadKind head) noexcept;

struct AgentOutput {
  std::vector<double> values;
  std::optional<double> state_value;
};

// d(loss)/d(output); state_value is ignored by agents without a critic.
struct OutputGradient {
  std::vector<double> values;
  double state_value = 0.0;
};

// A contiguous slice of the flat parameter vector. `category` selects the
// learning-rate group: "net" for classical weights, "theta", "lambda" or "w"
// for circuit parameters.
struct ParamGroup {
  std::string name;
  std::string category;
  std::size_t offset = 0;
  std::size_t size = 0;
};

class Agent {
 public:
  virtual ~Agent() = default;

  virtual std::string kind() const = 0;
  // Two agents with equal architecture strings can exchange parameters.
  virtual std::string architecture() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual HeadKind head() const = 0;

  // Deterministic given parameters and observation (exact estimation).
  virtual AgentOutput forward(std::span<const double> observation) = 0;

  // Adds d(sum_k g_k * out_k + g_v * value)/d(params) into `grad`. When the
  // observation matches the most recent forward() and the parameters have
  // not changed since, that forward result is reused.
  virtual void accumulate_gradient(std::span<const double> observation,
                                   const OutputGradient& output_gradient,
                                   std::span<double> grad) = 0;

  std::vector<double> gradient(std::span<const double> observation,
                               const OutputGradient& output_gradient);

  // Mutable access invalidates any cached forward result.
  std::span<double> parameters() {
    ++version_;
    return mutable_parameters();
  }
  std::span<const double> parameters() const { return const_parameters(); }
  std::size_t parameter_count() const { return const_parameters().size(); }

  virtual std::vector<ParamGroup> parameter_groups() const = 0;
  virtual std::unique_ptr<Agent> clone() const = 0;

  // Where circuit executions are counted; classical agents ignore it.
  virtual void set_execution_counter(metrics::ExecutionCounter*) {}

 protected:
  virtual std::span<double> mutable_parameters() = 0;
  virtual std::span<const double> const_parameters() const = 0;
  std::uint64_t version() const noexcept { return version_; }

 private:
  std::uint64_t version_ = 0;
};

// Copies source parameters into target. Throws ArgumentError if the
// architectures differ.
void sync_parameters(const Agent& source, Agent& target);

// Per-element learning rates built from each parameter group's category.
struct LearningRates {
  double net = 2.5e-4;
  double theta = 1e-3;
  double lambda = 1e-3;
  double w = 1e-2;

  double for_category(const std::string& category) const;
};

std::vector<double> learning_rate_vector(const Agent& agent, const LearningRates& rates);

// Flat named-vector snapshot: a JSON object mapping group name to an array.
nlohmann::json parameter_snapshot(const Agent& agent);
void load_parameter_snapshot(Agent& agent, const nlohmann::json& snapshot);
void save_parameters(const Agent& agent, const std::filesystem::path& path);
void load_parameters(Agent& agent, const std::filesystem::path& path);

// ------------------------------------------------------------------ classical

class ClassicalAgent final : public Agent {
 public:
  ClassicalAgent(HeadKind head, std::size_t input_dim, std::size_t n_actions,
                 std::vector<std::size_t> hidden_sizes, Rng& init_rng);

  std::string kind() const override { return "classical"; }
  std::string architecture() const override;
  std::size_t input_dim() const override { return actor_.input_size(); }
  std::size_t num_actions() const override { return actor_.output_size(); }
  HeadKind head() const override { return head_; }

  AgentOutput forward(std::span<const double> observation) override;
  void accumulate_gradient(std::span<const double> observation, const OutputGradient& g,
                           std::span<double> grad) override;

  std::vector<ParamGroup> parameter_groups() const override;
  std::unique_ptr<Agent> clone() const override { return std::make_unique<ClassicalAgent>(*this); }

 protected:
  std::span<double> mutable_parameters() override { return params_; }
  std::span<const double> const_parameters() const override { return params_; }

 private:
  void run_forward(std::span<const double> observation);

  HeadKind head_;
  nn::DenseNet actor_;
  std::optional<nn::DenseNet> critic_;
  std::vector<double> params_;  // actor parameters, then critic parameters

  std::vector<double> cached_obs_;
  std::uint64_t cached_version_ = ~std::uint64_t{0};
  nn::DenseNet::Tape actor_tape_, critic_tape_;
};

// ------------------------------------------------------------------- quantum

// Maps an observation onto an ansatz plus its feature vector. Structured
// problems rebuild the circuit per observation; the trainable parameter
// counts never change.
class CircuitModel {
 public:
  virtual ~CircuitModel() = default;

  virtual std::string describe() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t n_theta() const = 0;
  virtual std::size_t n_lambda() const = 0;
  virtual std::size_t n_outputs() const = 0;
  virtual const ansatz::AnsatzSpec& prepare(std::span<const double> observation,
                                            std::vector<double>& features) = 0;
  virtual std::unique_ptr<CircuitModel> clone() const = 0;
};

// Observation used directly as the feature vector (one feature per qubit).
std::unique_ptr<CircuitModel> hardware_efficient_model(int n_qubits, int n_layers, int n_outputs);
// TSP observation -> graph-equivariant circuit. The current city counts as
// available so that its edges carry the agent's position; n_outputs is
// n_nodes (one head per city) or 1 (Z on node 0, for critics).
std::unique_ptr<CircuitModel> tsp_graph_model(int n_nodes, int n_layers, int n_outputs);
// Knapsack observation -> cost-Hamiltonian circuit over the untaken items
// with the remaining capacity. Actor heads: Z per item plus a constant head
// for STOP; critic: Z on item 0.
std::unique_ptr<CircuitModel> knapsack_hamiltonian_model(int n_items, int n_layers, double penalty,
                                                         bool critic);

struct QuantumInit {
  double theta_range = M_PI;  // theta ~ U(-range, range)
  double lambda = 1.0;
  double w = 1.0;
  double beta = 1.0;
};

class QuantumAgent final : public Agent {
 public:
  // Policy heads get a trainable inverse temperature beta:
  // logits_k = beta * w_k * <O_k>. Value heads: Q_k = w_k * <O_k>.
  // ActorCritic adds value = w_v * <O_v> from `critic`.
  QuantumAgent(HeadKind head, std::unique_ptr<CircuitModel> actor,
               std::unique_ptr<CircuitModel> critic, const QuantumInit& init, Rng& init_rng,
               metrics::ExecutionCounter* counter, std::uint64_t shots = 0,
               std::uint64_t shot_seed = 0);
  QuantumAgent(const QuantumAgent& other);

  std::string kind() const override { return "quantum"; }
  std::string architecture() const override;
  std::size_t input_dim() const override { return actor_.model->input_dim(); }
  std::size_t num_actions() const override { return actor_.model->n_outputs(); }
  HeadKind head() const override { return head_; }

  AgentOutput forward(std::span<const double> observation) override;
  void accumulate_gradient(std::span<const double> observation, const OutputGradient& g,
                           std::span<double> grad) override;

  std::vector<ParamGroup> parameter_groups() const override;
  std::unique_ptr<Agent> clone() const override { return std::make_unique<QuantumAgent>(*this); }

  // Parameter-shift occurrences of the actor circuit for this observation.
  std::size_t parameter_occurrences(std::span<const double> observation);
  metrics::ExecutionCounter* counter() const noexcept { return counter_; }
  void set_execution_counter(metrics::ExecutionCounter* counter) override { counter_ = counter; }

 protected:
  std::span<double> mutable_parameters() override { return params_; }
  std::span<const double> const_parameters() const override { return params_; }

 private:
  struct Circuit {
    std::unique_ptr<CircuitModel> model;
    std::size_t theta_offset = 0;
    std::size_t lambda_offset = 0;
    std::size_t w_offset = 0;
    // Most recent evaluation.
    int n_qubits = 0;
    std::vector<qsim::Gate> gates;
    std::vector<qsim::Observable> observables;
    std::vector<double> expectations;
  };

  void evaluate(Circuit& c, std::span<const double> observation);
  void shift_gradient(Circuit& c, std::span<const double> coefficients, std::span<double> grad);
  void run_forward(std::span<const double> observation);
  AgentOutput output_from_cache() const;

  HeadKind head_;
  Circuit actor_;
  std::optional<Circuit> critic_;
  std::size_t beta_offset_ = 0;
  std::vector<double> params_;
  metrics::ExecutionCounter* counter_ = nullptr;
  std::uint64_t shots_ = 0;
  Rng shot_rng_;

  std::vector<double> cached_obs_;
  std::uint64_t cached_version_ = ~std::uint64_t{0};
};

// ------------------------------------------------------------------- factory

struct AgentOptions {
  std::string kind = "classical";  // "classical" | "quantum"
  HeadKind head = HeadKind::Value;
  std::vector<std::size_t> hidden_sizes{64, 64};
  int n_qubits = 0;  // 0: derived from the observation
  int n_layers = 2;
  std::string ansatz = "auto";  // "auto" | "hardware_efficient" | "graph" | "hamiltonian"
  std::uint64_t shots = 0;
  QuantumInit init;
  double knapsack_penalty = 1.0;
};

// `space` describes the observations the agent will receive (after any
// wrapper). Throws ConfigError for unsupported combinations.
std::unique_ptr<Agent> make_agent(const AgentOptions& options, const envs::SpaceDescriptor& space,
                                  Rng& init_rng, std::uint64_t shot_seed,
                                  metrics::ExecutionCounter* counter);

// Resolves ansatz "auto" for the given environment space.
std::string resolve_ansatz(const std::string& requested, const envs::SpaceDescriptor& space);

}  // namespace qrlforge::agents
