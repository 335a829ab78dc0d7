#include "qrlforge/agents.hpp"

#include <fstream>
#include <sstream>

#include "qrlforge/error.hpp"

namespace qrlforge::agents {

const char* head_name(HeadKind head) noexcept {
  switch (head) {
    case HeadKind::Value: return "value";
    case HeadKind::Policy: return "policy";
    case HeadKind::ActorCritic: return "actor_critic";
  }
  return "?";
}

std::vector<double> Agent::gradient(std::span<const double> observation,
                                    const OutputGradient& output_gradient) {
  std::vector<double> g(parameter_count(), 0.0);
  accumulate_gradient(observation, output_gradient, g);
  return g;
}

void sync_parameters(const Agent& source, Agent& target) {
  if (source.architecture() != target.architecture()) {
    throw ArgumentError("cannot sync parameters between '" + source.architecture() + "' and '" +
                        target.architecture() + "'");
  }
  const auto src = source.parameters();
  auto dst = target.parameters();
  std::copy(src.begin(), src.end(), dst.begin());
}

double LearningRates::for_category(const std::string& category) const {
  if (category == "net") return net;
  if (category == "theta") return theta;
  if (category == "lambda") return lambda;
  if (category == "w") return w;
  throw ArgumentError("unknown parameter category '" + category + "'");
}

std::vector<double> learning_rate_vector(const Agent& agent, const LearningRates& rates) {
  std::vector<double> lr(agent.parameter_count(), 0.0);
  for (const auto& g : agent.parameter_groups()) {
    const double r = rates.for_category(g.category);
    std::fill_n(lr.begin() + static_cast<std::ptrdiff_t>(g.offset), g.size, r);
  }
  return lr;
}

nlohmann::json parameter_snapshot(const Agent& agent) {
  nlohmann::json out = nlohmann::json::object();
  const auto p = agent.parameters();
  for (const auto& g : agent.parameter_groups()) {
    out[g.name] = std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(g.offset),
                                      p.begin() + static_cast<std::ptrdiff_t>(g.offset + g.size));
  }
  return out;
}

void load_parameter_snapshot(Agent& agent, const nlohmann::json& snapshot) {
  if (!snapshot.is_object()) throw ArgumentError("parameter snapshot must be a JSON object");
  const auto groups = agent.parameter_groups();
  std::vector<double> values(agent.parameter_count());
  for (const auto& g : groups) {
    if (!snapshot.contains(g.name)) throw ArgumentError("parameter snapshot lacks '" + g.name + "'");
    const auto& arr = snapshot.at(g.name);
    if (!arr.is_array() || arr.size() != g.size) {
      throw ArgumentError("parameter group '" + g.name + "' expects " + std::to_string(g.size) +
                          " values");
    }
    for (std::size_t i = 0; i < g.size; ++i) values[g.offset + i] = arr[i].get<double>();
  }
  auto dst = agent.parameters();
  std::copy(values.begin(), values.end(), dst.begin());
}

void save_parameters(const Agent& agent, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  nlohmann::json doc;
  doc["architecture"] = agent.architecture();
  doc["parameters"] = parameter_snapshot(agent);
  f << doc.dump(1) << '\n';
  if (!f) throw IoError("failed writing " + path.string());
}

void load_parameters(Agent& agent, const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (doc.value("architecture", std::string{}) != agent.architecture()) {
    throw ArgumentError(path.string() + " holds parameters for a different architecture");
  }
  load_parameter_snapshot(agent, doc.at("parameters"));
}

// ------------------------------------------------------------------ classical

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden,
                                     std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

std::string sizes_string(const std::vector<std::size_t>& sizes) {
  std::ostringstream os;
  for (std::size_t i = 0; i < sizes.size(); ++i) os << (i ? "-" : "") << sizes[i];
  return os.str();
}

}  // namespace

ClassicalAgent::ClassicalAgent(HeadKind head, std::size_t input_dim, std::size_t n_actions,
                               std::vector<std::size_t> hidden_sizes, Rng& init_rng)
    : head_(head), actor_(layer_sizes(input_dim, hidden_sizes, n_actions)) {
  actor_.init_uniform(init_rng);
  params_.assign(actor_.parameters().begin(), actor_.parameters().end());
  if (head == HeadKind::ActorCritic) {
    critic_.emplace(layer_sizes(input_dim, hidden_sizes, 1));
    critic_->init_uniform(init_rng);
    params_.insert(params_.end(), critic_->parameters().begin(), critic_->parameters().end());
  }
}

std::string ClassicalAgent::architecture() const {
  std::string s = std::string("classical/") + head_name(head_) + "/" + sizes_string(actor_.layer_sizes());
  if (critic_) s += "+critic:" + sizes_string(critic_->layer_sizes());
  return s;
}

void ClassicalAgent::run_forward(std::span<const double> observation) {
  const std::span<const double> p(params_);
  actor_.forward(p.first(actor_.parameter_count()), observation, actor_tape_);
  if (critic_) {
    critic_->forward(p.subspan(actor_.parameter_count()), observation, critic_tape_);
  }
  cached_obs_.assign(observation.begin(), observation.end());
  cached_version_ = version();
}

AgentOutput ClassicalAgent::forward(std::span<const double> observation) {
  run_forward(observation);
  AgentOutput out;
  const auto y = actor_tape_.output();
  out.values.assign(y.begin(), y.end());
  if (critic_) out.state_value = critic_tape_.output()[0];
  return out;
}

void ClassicalAgent::accumulate_gradient(std::span<const double> observation,
                                         const OutputGradient& g, std::span<double> grad) {
  if (grad.size() != params_.size()) throw ArgumentError("gradient buffer size mismatch");
  if (g.values.size() != actor_.output_size()) throw ArgumentError("output gradient size mismatch");
  if (cached_version_ != version() ||
      !std::equal(observation.begin(), observation.end(), cached_obs_.begin(), cached_obs_.end())) {
    run_forward(observation);
  }
  const std::span<const double> p(params_);
  const std::size_t na = actor_.parameter_count();
  actor_.backward(p.first(na), actor_tape_, g.values, grad.first(na));
  if (critic_ && g.state_value != 0.0) {
    const double gv[1] = {g.state_value};
    critic_->backward(p.subspan(na), critic_tape_, gv, grad.subspan(na));
  }
}

std::vector<ParamGroup> ClassicalAgent::parameter_groups() const {
  std::vector<ParamGroup> groups;
  auto add_net = [&](const nn::DenseNet& net, const std::string& prefix, std::size_t base) {
    std::size_t off = base;
    const auto& s = net.layer_sizes();
    for (std::size_t l = 0; l + 1 < s.size(); ++l) {
      const std::size_t nw = s[l] * s[l + 1];
      groups.push_back({prefix + ".l" + std::to_string(l) + ".weight", "net", off, nw});
      off += nw;
      groups.push_back({prefix + ".l" + std::to_string(l) + ".bias", "net", off, s[l + 1]});
      off += s[l + 1];
    }
  };
  add_net(actor_, "actor", 0);
  if (critic_) add_net(*critic_, "critic", actor_.parameter_count());
  return groups;
}

// ------------------------------------------------------------------- factory

std::string resolve_ansatz(const std::string& requested, const envs::SpaceDescriptor& space) {
  if (requested != "auto") {
    if (requested != "hardware_efficient" && requested != "graph" && requested != "hamiltonian") {
      throw ConfigError("unknown ansatz '" + requested + "'");
    }
    return requested;
  }
  if (space.problem == "tsp") return "graph";
  if (space.problem == "knapsack") return "hamiltonian";
  return "hardware_efficient";
}

std::unique_ptr<Agent> make_agent(const AgentOptions& options, const envs::SpaceDescriptor& space,
                                  Rng& init_rng, std::uint64_t shot_seed,
                                  metrics::ExecutionCounter* counter) {
  if (space.action_kind != envs::ActionKind::Discrete || space.action_count == 0) {
    throw ConfigError("agents need a discrete action space");
  }
  if (options.kind == "classical") {
    if (options.hidden_sizes.empty()) throw ConfigError("agent_params.hidden_sizes must not be empty");
    return std::make_unique<ClassicalAgent>(options.head, space.observation_dim, space.action_count,
                                            options.hidden_sizes, init_rng);
  }
  if (options.kind != "quantum") {
    throw ConfigError("unknown agent_kind '" + options.kind + "' (expected classical or quantum)");
  }
  if (options.n_layers < 1) throw ConfigError("agent_params.n_layers must be at least 1");

  const std::string family = resolve_ansatz(options.ansatz, space);
  const int n_actions = static_cast<int>(space.action_count);
  std::unique_ptr<CircuitModel> actor, critic;
  const bool with_critic = options.head == HeadKind::ActorCritic;

  if (family == "hardware_efficient") {
    if (space.kind == envs::ObservationKind::DiscreteIndex) {
      throw ConfigError("hardware-efficient circuits need an observation wrapper for discrete states");
    }
    const int nq = options.n_qubits > 0 ? options.n_qubits : static_cast<int>(space.observation_dim);
    if (static_cast<std::size_t>(nq) != space.observation_dim) {
      throw ConfigError("n_qubits " + std::to_string(nq) + " does not match observation size " +
                        std::to_string(space.observation_dim));
    }
    if (n_actions > nq) {
      throw ConfigError(std::to_string(n_actions) + " actions do not fit on " + std::to_string(nq) +
                        " qubits");
    }
    if (nq > qsim::kMaxQubits) throw ConfigError("observation too large for the simulator");
    actor = hardware_efficient_model(nq, options.n_layers, n_actions);
    if (with_critic) critic = hardware_efficient_model(nq, options.n_layers, 1);
  } else if (family == "graph") {
    if (space.problem != "tsp") throw ConfigError("the graph ansatz supports tsp environments only");
    const int n = static_cast<int>(space.problem_size);
    actor = tsp_graph_model(n, options.n_layers, n);
    if (with_critic) critic = tsp_graph_model(n, options.n_layers, 1);
  } else {
    if (space.problem != "knapsack") {
      throw ConfigError("the hamiltonian ansatz supports knapsack environments only");
    }
    const int n = static_cast<int>(space.problem_size);
    actor = knapsack_hamiltonian_model(n, options.n_layers, options.knapsack_penalty, false);
    if (with_critic) {
      critic = knapsack_hamiltonian_model(n, options.n_layers, options.knapsack_penalty, true);
    }
  }
  return std::make_unique<QuantumAgent>(options.head, std::move(actor), std::move(critic),
                                        options.init, init_rng, counter, options.shots, shot_seed);
}

}  // namespace qrlforge::agents
