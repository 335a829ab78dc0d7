#include <algorithm>
#include <sstream>

#include "qrlforge/agents.hpp"
#include "qrlforge/error.hpp"

namespace qrlforge::agents {

namespace {

class HardwareEfficientModel final : public CircuitModel {
 public:
  HardwareEfficientModel(int n_qubits, int n_layers, int n_outputs)
      : layers_(n_layers), spec_(ansatz::build_hardware_efficient(n_qubits, n_layers, n_outputs)) {}

  std::string describe() const override {
    std::ostringstream os;
    os << "hea(q=" << spec_.n_qubits << ",l=" << layers_ << ",o=" << spec_.observables.size() << ")";
    return os.str();
  }
  std::size_t input_dim() const override { return spec_.n_features; }
  std::size_t n_theta() const override { return spec_.n_theta; }
  std::size_t n_lambda() const override { return spec_.n_lambda; }
  std::size_t n_outputs() const override { return spec_.observables.size(); }

  const ansatz::AnsatzSpec& prepare(std::span<const double> observation,
                                    std::vector<double>& features) override {
    if (observation.size() != spec_.n_features) {
      throw ArgumentError("observation has length " + std::to_string(observation.size()) +
                          ", circuit expects " + std::to_string(spec_.n_features));
    }
    features.assign(observation.begin(), observation.end());
    return spec_;
  }
  std::unique_ptr<CircuitModel> clone() const override {
    return std::make_unique<HardwareEfficientModel>(*this);
  }

 private:
  int layers_;
  ansatz::AnsatzSpec spec_;
};

class TspGraphModel final : public CircuitModel {
 public:
  TspGraphModel(int n_nodes, int n_layers, int n_outputs)
      : n_(n_nodes), layers_(n_layers), spec_(ansatz::build_graph_equivariant(n_nodes, n_layers)) {
    if (n_outputs == 1) {
      spec_.observables = {qsim::Observable::z(0)};
    } else if (n_outputs != n_nodes) {
      throw ArgumentError("graph circuit outputs must be 1 or the node count");
    }
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "graph(n=" << n_ << ",l=" << layers_ << ",o=" << spec_.observables.size() << ")";
    return os.str();
  }
  std::size_t input_dim() const override {
    return ansatz::edge_count(n_) + 2 * static_cast<std::size_t>(n_);
  }
  std::size_t n_theta() const override { return spec_.n_theta; }
  std::size_t n_lambda() const override { return 0; }
  std::size_t n_outputs() const override { return spec_.observables.size(); }

  const ansatz::AnsatzSpec& prepare(std::span<const double> observation,
                                    std::vector<double>& features) override {
    if (observation.size() != input_dim()) {
      throw ArgumentError("tsp observation has length " + std::to_string(observation.size()) +
                          ", expected " + std::to_string(input_dim()));
    }
    const std::size_t e = ansatz::edge_count(n_);
    const auto n = static_cast<std::size_t>(n_);
    features.assign(observation.begin(), observation.begin() + static_cast<std::ptrdiff_t>(e + n));
    for (std::size_t i = 0; i < n; ++i) {
      if (observation[e + n + i] != 0.0) features[e + i] = 1.0;
    }
    return spec_;
  }
  std::unique_ptr<CircuitModel> clone() const override { return std::make_unique<TspGraphModel>(*this); }

 private:
  int n_;
  int layers_;
  ansatz::AnsatzSpec spec_;
};

class KnapsackModel final : public CircuitModel {
 public:
  KnapsackModel(int n_items, int n_layers, double penalty, bool critic)
      : n_(n_items), layers_(n_layers), penalty_(penalty), critic_(critic) {
    if (n_items < 1) throw ArgumentError("knapsack circuit needs at least one item");
    if (n_items > qsim::kMaxQubits) throw ArgumentError("too many knapsack items for the simulator");
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "knapsack(n=" << n_ << ",l=" << layers_ << ",p=" << penalty_ << ",o=" << n_outputs() << ")";
    return os.str();
  }
  std::size_t input_dim() const override { return 3 * static_cast<std::size_t>(n_) + 1; }
  std::size_t n_theta() const override { return 2 * static_cast<std::size_t>(layers_); }
  std::size_t n_lambda() const override { return 0; }
  std::size_t n_outputs() const override { return critic_ ? 1 : static_cast<std::size_t>(n_) + 1; }

  const ansatz::AnsatzSpec& prepare(std::span<const double> observation,
                                    std::vector<double>& features) override {
    if (observation.size() != input_dim()) {
      throw ArgumentError("knapsack observation has length " + std::to_string(observation.size()) +
                          ", expected " + std::to_string(input_dim()));
    }
    features.clear();
    if (built_ && std::equal(observation.begin(), observation.end(), last_.begin(), last_.end())) {
      return spec_;
    }
    const auto n = static_cast<std::size_t>(n_);
    std::vector<double> v(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool taken = observation[3 * i + 2] != 0.0;
      v[i] = taken ? 0.0 : observation[3 * i];
      w[i] = taken ? 0.0 : observation[3 * i + 1];
    }
    spec_ = ansatz::build_cost_hamiltonian_knapsack(v, w, observation[3 * n], penalty_, layers_).spec;
    if (critic_) {
      spec_.observables = {qsim::Observable::z(0)};
    } else {
      spec_.observables.push_back(qsim::Observable::identity());
    }
    last_.assign(observation.begin(), observation.end());
    built_ = true;
    return spec_;
  }
  std::unique_ptr<CircuitModel> clone() const override { return std::make_unique<KnapsackModel>(*this); }

 private:
  int n_;
  int layers_;
  double penalty_;
  bool critic_;
  bool built_ = false;
  std::vector<double> last_;
  ansatz::AnsatzSpec spec_;
};

}  // namespace

std::unique_ptr<CircuitModel> hardware_efficient_model(int n_qubits, int n_layers, int n_outputs) {
  return std::make_unique<HardwareEfficientModel>(n_qubits, n_layers, n_outputs);
}

std::unique_ptr<CircuitModel> tsp_graph_model(int n_nodes, int n_layers, int n_outputs) {
  return std::make_unique<TspGraphModel>(n_nodes, n_layers, n_outputs);
}

std::unique_ptr<CircuitModel> knapsack_hamiltonian_model(int n_items, int n_layers, double penalty,
                                                         bool critic) {
  return std::make_unique<KnapsackModel>(n_items, n_layers, penalty, critic);
}

// -------------------------------------------------------------------- agent

QuantumAgent::QuantumAgent(HeadKind head, std::unique_ptr<CircuitModel> actor,
                           std::unique_ptr<CircuitModel> critic, const QuantumInit& init,
                           Rng& init_rng, metrics::ExecutionCounter* counter, std::uint64_t shots,
                           std::uint64_t shot_seed)
    : head_(head), counter_(counter), shots_(shots), shot_rng_(shot_seed) {
  if (!actor) throw ArgumentError("quantum agent needs an actor circuit");
  if ((head == HeadKind::ActorCritic) != static_cast<bool>(critic)) {
    throw ArgumentError("a critic circuit is required exactly for actor-critic heads");
  }

  auto layout = [&](Circuit& c, std::unique_ptr<CircuitModel> model) {
    c.model = std::move(model);
    c.theta_offset = params_.size();
    for (std::size_t i = 0; i < c.model->n_theta(); ++i) {
      params_.push_back(init_rng.uniform(-init.theta_range, init.theta_range));
    }
    c.lambda_offset = params_.size();
    params_.insert(params_.end(), c.model->n_lambda(), init.lambda);
    c.w_offset = params_.size();
    params_.insert(params_.end(), c.model->n_outputs(), init.w);
  };

  layout(actor_, std::move(actor));
  beta_offset_ = params_.size();
  if (head != HeadKind::Value) params_.push_back(init.beta);
  if (critic) {
    critic_.emplace();
    layout(*critic_, std::move(critic));
  }
}

QuantumAgent::QuantumAgent(const QuantumAgent& o)
    : Agent(o), head_(o.head_), beta_offset_(o.beta_offset_), params_(o.params_),
      counter_(o.counter_), shots_(o.shots_), shot_rng_(o.shot_rng_), cached_obs_(o.cached_obs_),
      cached_version_(o.cached_version_) {
  auto copy = [](const Circuit& from, Circuit& to) {
    to.model = from.model->clone();
    to.theta_offset = from.theta_offset;
    to.lambda_offset = from.lambda_offset;
    to.w_offset = from.w_offset;
    to.n_qubits = from.n_qubits;
    to.gates = from.gates;
    to.observables = from.observables;
    to.expectations = from.expectations;
  };
  copy(o.actor_, actor_);
  if (o.critic_) {
    critic_.emplace();
    copy(*o.critic_, *critic_);
  }
}

std::string QuantumAgent::architecture() const {
  std::string s = std::string("quantum/") + head_name(head_) + "/" + actor_.model->describe();
  if (critic_) s += "+critic:" + critic_->model->describe();
  return s;
}

void QuantumAgent::evaluate(Circuit& c, std::span<const double> observation) {
  std::vector<double> features;
  const ansatz::AnsatzSpec& spec = c.model->prepare(observation, features);
  const std::span<const double> p(params_);
  c.n_qubits = spec.n_qubits;
  c.gates = ansatz::bind(spec, p.subspan(c.theta_offset, spec.n_theta),
                         p.subspan(c.lambda_offset, spec.n_lambda), features);
  c.observables = spec.observables;
  const qsim::Statevector state = qsim::run_circuit(c.n_qubits, c.gates, counter_);
  c.expectations = qsim::expectations(state, c.observables, qsim::Estimator{shots_, &shot_rng_});
}

void QuantumAgent::run_forward(std::span<const double> observation) {
  evaluate(actor_, observation);
  if (critic_) evaluate(*critic_, observation);
  cached_obs_.assign(observation.begin(), observation.end());
  cached_version_ = version();
}

AgentOutput QuantumAgent::output_from_cache() const {
  AgentOutput out;
  const double beta = head_ == HeadKind::Value ? 1.0 : params_[beta_offset_];
  out.values.resize(actor_.expectations.size());
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    out.values[k] = beta * params_[actor_.w_offset + k] * actor_.expectations[k];
  }
  if (critic_) out.state_value = params_[critic_->w_offset] * critic_->expectations[0];
  return out;
}

AgentOutput QuantumAgent::forward(std::span<const double> observation) {
  run_forward(observation);
  return output_from_cache();
}

void QuantumAgent::shift_gradient(Circuit& c, std::span<const double> coefficients,
                                  std::span<double> grad) {
  const std::size_t nt = c.model->n_theta(), nl = c.model->n_lambda();
  const qsim::Jacobian jac = qsim::parameter_shift_gradient(
      c.n_qubits, c.gates, nt + nl, c.observables, counter_, qsim::Estimator{shots_, &shot_rng_});
  for (std::size_t j = 0; j < nt + nl; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < coefficients.size(); ++k) s += coefficients[k] * jac(k, j);
    if (j < nt) {
      grad[c.theta_offset + j] += s;
    } else {
      grad[c.lambda_offset + j - nt] += s;
    }
  }
}

void QuantumAgent::accumulate_gradient(std::span<const double> observation, const OutputGradient& g,
                                       std::span<double> grad) {
  if (grad.size() != params_.size()) throw ArgumentError("gradient buffer size mismatch");
  if (g.values.size() != actor_.model->n_outputs()) throw ArgumentError("output gradient size mismatch");
  if (cached_version_ != version() ||
      !std::equal(observation.begin(), observation.end(), cached_obs_.begin(), cached_obs_.end())) {
    run_forward(observation);
  }

  const bool policy = head_ != HeadKind::Value;
  const double beta = policy ? params_[beta_offset_] : 1.0;
  const std::size_t k_out = g.values.size();
  std::vector<double> coeff(k_out);
  double beta_grad = 0.0;
  for (std::size_t k = 0; k < k_out; ++k) {
    const double w = params_[actor_.w_offset + k];
    const double e = actor_.expectations[k];
    grad[actor_.w_offset + k] += g.values[k] * beta * e;
    beta_grad += g.values[k] * w * e;
    coeff[k] = g.values[k] * beta * w;
  }
  if (policy) grad[beta_offset_] += beta_grad;
  // Always shifted, so the execution count depends only on the circuit.
  shift_gradient(actor_, coeff, grad);

  if (critic_) {
    grad[critic_->w_offset] += g.state_value * critic_->expectations[0];
    const double c[1] = {g.state_value * params_[critic_->w_offset]};
    shift_gradient(*critic_, c, grad);
  }
}

std::vector<ParamGroup> QuantumAgent::parameter_groups() const {
  std::vector<ParamGroup> groups;
  auto add = [&](const Circuit& c, const std::string& prefix) {
    groups.push_back({prefix + ".theta", "theta", c.theta_offset, c.model->n_theta()});
    if (c.model->n_lambda() > 0) {
      groups.push_back({prefix + ".lambda", "lambda", c.lambda_offset, c.model->n_lambda()});
    }
    groups.push_back({prefix + ".w", "w", c.w_offset, c.model->n_outputs()});
  };
  add(actor_, "actor");
  if (head_ != HeadKind::Value) groups.push_back({"actor.beta", "w", beta_offset_, 1});
  if (critic_) add(*critic_, "critic");
  return groups;
}

std::size_t QuantumAgent::parameter_occurrences(std::span<const double> observation) {
  std::vector<double> features;
  const ansatz::AnsatzSpec& spec = actor_.model->prepare(observation, features);
  const std::span<const double> p(params_);
  const auto gates = ansatz::bind(spec, p.subspan(actor_.theta_offset, spec.n_theta),
                                  p.subspan(actor_.lambda_offset, spec.n_lambda), features);
  return qsim::parameter_occurrences(gates);
}

}  // namespace qrlforge::agents
