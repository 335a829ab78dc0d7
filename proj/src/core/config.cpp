#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "qrlforge/error.hpp"
#include "qrlforge/runner.hpp"

namespace qrlforge::runner {

namespace {

const std::set<std::string> kTopLevelKeys = {
    "run_name",   "algorithm",        "agent_kind",   "env_id",      "seed",
    "total_timesteps", "total_episodes", "output_dir", "env_params", "algorithm_params",
    "agent_params"};

std::string required_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing required key \"") + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_string() || v.get<std::string>().empty()) {
    throw ConfigError(std::string("\"") + key + "\" must be a non-empty string");
  }
  return v.get<std::string>();
}

std::uint64_t as_count(const nlohmann::json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == static_cast<double>(static_cast<std::uint64_t>(d))) {
      return static_cast<std::uint64_t>(d);
    }
  }
  throw ConfigError("\"" + key + "\" must be a non-negative integer");
}

nlohmann::json object_or_empty(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return nlohmann::json::object();
  if (!j.at(key).is_object()) throw ConfigError(std::string("\"") + key + "\" must be an object");
  return j.at(key);
}

// Reads typed values out of a nested parameter object and remembers which
// keys were consumed, so leftovers can be reported.
class ParamReader {
 public:
  ParamReader(const nlohmann::json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {}

  bool has(const std::string& key) {
    used_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(name(key) + " must be a number");
    return v.get<double>();
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key, 0.0);
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    return as_count(obj_.at(key), name(key));
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_boolean()) throw ConfigError(name(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(name(key) + " must be a string");
    return v.get<std::string>();
  }

  std::vector<std::size_t> sizes(const std::string& key, std::vector<std::size_t> fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(name(key) + " must be an array of positive integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      const auto n = as_count(e, name(key));
      if (n == 0) throw ConfigError(name(key) + " entries must be positive");
      out.push_back(static_cast<std::size_t>(n));
    }
    return out;
  }

  void collect_unknown(std::vector<std::string>& warnings) const {
    for (const auto& [k, v] : obj_.items()) {
      if (!used_.count(k)) warnings.push_back("unknown key \"" + name(k) + "\" ignored");
    }
  }

 private:
  std::string name(const std::string& key) const { return prefix_ + "." + key; }

  const nlohmann::json& obj_;
  std::string prefix_;
  std::set<std::string> used_;
};

std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  c.run_name = required_string(j, "run_name");
  c.algorithm = required_string(j, "algorithm");
  c.agent_kind = required_string(j, "agent_kind");
  c.env_id = required_string(j, "env_id");
  if (c.run_name.find_first_of("/\\") != std::string::npos || c.run_name == "." || c.run_name == "..") {
    throw ConfigError("\"run_name\" must not contain path separators");
  }
  if (j.contains("seed")) c.seed = as_count(j.at("seed"), "seed");
  if (j.contains("total_timesteps") && !j.at("total_timesteps").is_null()) {
    c.total_timesteps = as_count(j.at("total_timesteps"), "total_timesteps");
  }
  if (j.contains("total_episodes") && !j.at("total_episodes").is_null()) {
    c.total_episodes = as_count(j.at("total_episodes"), "total_episodes");
  }
  if (!c.total_timesteps && !c.total_episodes) c.total_timesteps = 100000;
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("\"output_dir\" must be a string");
    c.output_dir = j.at("output_dir").get<std::string>();
  }
  c.env_params = object_or_empty(j, "env_params");
  c.algorithm_params = object_or_empty(j, "algorithm_params");
  c.agent_params = object_or_empty(j, "agent_params");
  for (const auto& [k, v] : j.items()) {
    if (!kTopLevelKeys.count(k)) c.warnings.push_back("unknown key \"" + k + "\" ignored");
  }
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["run_name"] = run_name;
  j["algorithm"] = algorithm;
  j["agent_kind"] = agent_kind;
  j["env_id"] = env_id;
  j["seed"] = seed;
  j["total_timesteps"] = total_timesteps ? nlohmann::json(*total_timesteps) : nlohmann::json(nullptr);
  j["total_episodes"] = total_episodes ? nlohmann::json(*total_episodes) : nlohmann::json(nullptr);
  j["output_dir"] = output_dir;
  j["env_params"] = env_params;
  j["algorithm_params"] = algorithm_params;
  j["agent_params"] = agent_params;
  return j;
}

std::string RunConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("output_dir");
  const std::string s = j.dump();  // object keys are sorted, so this is canonical
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

std::filesystem::path RunConfig::trial_dir() const {
  return std::filesystem::path(output_dir) / run_name / std::to_string(seed);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return RunConfig::from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_overrides(RunConfig& config, const Overrides& o) {
  if (o.seed) config.seed = *o.seed;
  if (o.output_dir) {
    config.output_dir = *o.output_dir;
  } else if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    config.output_dir = env;
  }
}

Resolved resolve(const RunConfig& c) {
  Resolved r;
  algorithms::TrainSpec& t = r.train;
  t.algorithm = algorithms::parse_algorithm(c.algorithm);
  t.total_timesteps = c.total_timesteps;
  t.total_episodes = c.total_episodes;
  if (c.agent_kind != "classical" && c.agent_kind != "quantum") {
    throw ConfigError("unknown agent_kind '" + c.agent_kind + "' (expected classical or quantum)");
  }
  const bool quantum = c.agent_kind == "quantum";
  const bool ppo = t.algorithm == algorithms::Algorithm::Ppo;

  ParamReader a(c.algorithm_params, "algorithm_params");
  t.learning_rates.net = a.number("learning_rate", 2.5e-4);
  t.learning_rates.theta = a.number("lr_theta", 1e-3);
  t.learning_rates.lambda = a.number("lr_lambda", 1e-3);
  t.learning_rates.w = a.number("lr_w", 1e-2);
  t.max_grad_norm = a.number("max_grad_norm", ppo ? 0.5 : 0.0);
  t.anneal_lr = a.boolean("anneal_lr", ppo);
  const double gamma = a.number("gamma", 0.99);
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("algorithm_params.gamma must lie in [0, 1]");

  auto& d = t.dqn;
  d.gamma = gamma;
  d.buffer_size = a.count("buffer_size", 10000);
  d.batch_size = a.count("batch_size", quantum ? 16 : 32);
  d.learning_starts = a.count("learning_starts", 1000);
  d.train_frequency = a.count("train_frequency", 1);
  d.target_sync_interval = a.count("target_sync_interval", 100);
  d.epsilon_start = a.number("epsilon_start", 1.0);
  d.epsilon_end = a.number("epsilon_end", 0.05);
  d.epsilon_decay_fraction = a.number("epsilon_decay_fraction", 0.5);
  d.epsilon_horizon = a.count("epsilon_horizon", 0);

  auto& rf = t.reinforce;
  rf.gamma = gamma;
  rf.baseline = algorithms::parse_baseline(a.string("baseline", "mean"));
  rf.batch_episodes = a.count("batch_episodes", 1);

  auto& p = t.ppo;
  p.gamma = gamma;
  p.num_steps = a.count("num_steps", 512);
  p.epochs = a.count("epochs", 4);
  p.minibatch_size = a.count("minibatch_size", 128);
  p.clip = a.number("clip", 0.2);
  p.gae_lambda = a.number("gae_lambda", 0.95);
  p.value_coef = a.number("value_coef", 0.5);
  p.entropy_coef = a.number("entropy_coef", 0.01);
  p.normalize_advantages = a.boolean("normalize_advantages", true);

  t.stop_mean_return = a.optional_number("stop_mean_return");
  t.eval_interval = a.count("eval_interval", 0);
  t.eval_episodes = a.count("eval_episodes", 100);
  t.eval_stop_return = a.optional_number("eval_stop_return");
  a.collect_unknown(r.warnings);

  if (d.batch_size == 0 || d.buffer_size == 0 || d.train_frequency == 0 || d.target_sync_interval == 0) {
    throw ConfigError("dqn buffer_size, batch_size, train_frequency and target_sync_interval must be positive");
  }
  if (rf.batch_episodes == 0) throw ConfigError("algorithm_params.batch_episodes must be positive");
  if (p.num_steps == 0 || p.epochs == 0 || p.minibatch_size == 0) {
    throw ConfigError("ppo num_steps, epochs and minibatch_size must be positive");
  }
  if (t.algorithm == algorithms::Algorithm::Dqn && !c.total_timesteps && d.epsilon_horizon == 0) {
    throw ConfigError("dqn with total_episodes needs algorithm_params.epsilon_horizon");
  }

  ParamReader g(c.agent_params, "agent_params");
  auto& o = r.agent;
  o.kind = c.agent_kind;
  o.head = algorithms::head_for(t.algorithm);
  o.hidden_sizes = g.sizes("hidden_sizes", {64, 64});
  o.n_qubits = static_cast<int>(g.count("n_qubits", 0));
  o.n_layers = static_cast<int>(g.count("n_layers", 2));
  o.ansatz = g.string("ansatz", "auto");
  o.shots = g.count("shots", 0);
  o.init.theta_range = g.number("theta_init_range", M_PI);
  o.init.lambda = g.number("lambda_init", 1.0);
  o.init.w = g.number("w_init", 1.0);
  o.init.beta = g.number("beta_init", 1.0);
  const std::string wrapper = g.string("observation_wrapper", "auto");
  g.collect_unknown(r.warnings);

  if (c.env_params.contains("penalty") && c.env_params.at("penalty").is_number()) {
    o.knapsack_penalty = c.env_params.at("penalty").get<double>();
  }

  if (wrapper == "auto") {
    const auto space = envs::make_environment(c.env_id, c.env_params)->space();
    if (space.kind == envs::ObservationKind::DiscreteIndex) {
      r.wrapper = quantum ? envs::WrapperKind::DiscreteIndex : envs::WrapperKind::OneHot;
    } else if (quantum && space.kind == envs::ObservationKind::Continuous && space.problem.empty()) {
      r.wrapper = envs::WrapperKind::Continuous;
    }
  } else {
    r.wrapper = envs::parse_wrapper(wrapper);
  }
  return r;
}

std::unique_ptr<envs::Environment> make_env(const RunConfig& config, envs::WrapperKind wrapper) {
  auto env = envs::make_environment(config.env_id, config.env_params);
  if (wrapper == envs::WrapperKind::None) return env;
  return std::make_unique<envs::ObservationWrapper>(std::move(env), wrapper);
}

void RunConfig::validate() const {
  const Resolved r = resolve(*this);
  auto env = make_env(*this, r.wrapper);
  const auto space = env->space();
  if (space.action_kind != envs::ActionKind::Discrete) {
    throw ConfigError(algorithm + " requires a discrete action space, but " + env_id +
                      " has continuous actions");
  }
  Rng probe(0);
  agents::make_agent(r.agent, space, probe, 0, nullptr);
}

}  // namespace qrlforge::runner
