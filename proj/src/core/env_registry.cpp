#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <regex>
#include <string>

#include "qrlforge/envs.hpp"
#include "qrlforge/error.hpp"

namespace qrlforge::envs {

// ---------------------------------------------------------------- wrappers

std::vector<double> wrap_continuous(std::span<const double> observation,
                                    std::span<const std::optional<DimRange>> bounds) {
  std::vector<double> out(observation.size());
  for (std::size_t i = 0; i < observation.size(); ++i) {
    const double v = observation[i];
    if (i < bounds.size() && bounds[i] && bounds[i]->high > bounds[i]->low) {
      const DimRange& r = *bounds[i];
      const double unit = 2.0 * (v - r.low) / (r.high - r.low) - 1.0;
      out[i] = M_PI * std::clamp(unit, -1.0, 1.0);
    } else {
      out[i] = std::atan(v);
    }
  }
  return out;
}

std::size_t discrete_index_bits(std::size_t n_states) noexcept {
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n_states) ++bits;
  return std::max<std::size_t>(bits, 1);
}

std::vector<double> wrap_discrete_index(std::size_t state_index, std::size_t n_states) {
  if (state_index >= n_states) {
    throw IndexError("state index " + std::to_string(state_index) + " outside [0, " +
                     std::to_string(n_states) + ")");
  }
  const std::size_t bits = discrete_index_bits(n_states);
  std::vector<double> out(bits);
  for (std::size_t b = 0; b < bits; ++b) {
    out[b] = ((state_index >> (bits - 1 - b)) & 1U) ? M_PI : 0.0;
  }
  return out;
}

WrapperKind parse_wrapper(const std::string& name) {
  if (name == "none") return WrapperKind::None;
  if (name == "continuous" || name == "arctan") return WrapperKind::Continuous;
  if (name == "discrete" || name == "discrete_index") return WrapperKind::DiscreteIndex;
  if (name == "onehot") return WrapperKind::OneHot;
  throw ConfigError("unknown observation wrapper '" + name + "'");
}

const char* wrapper_name(WrapperKind kind) noexcept {
  switch (kind) {
    case WrapperKind::None: return "none";
    case WrapperKind::Continuous: return "continuous";
    case WrapperKind::DiscreteIndex: return "discrete";
    case WrapperKind::OneHot: return "onehot";
  }
  return "?";
}

ObservationWrapper::ObservationWrapper(std::unique_ptr<Environment> inner, WrapperKind kind)
    : inner_(std::move(inner)), kind_(kind), inner_space_(inner_->space()), space_(inner_space_) {
  switch (kind_) {
    case WrapperKind::None:
      break;
    case WrapperKind::Continuous:
      if (inner_space_.kind == ObservationKind::DiscreteIndex) {
        throw ConfigError("continuous wrapper cannot wrap discrete-index environment " + inner_->id());
      }
      space_.kind = ObservationKind::Continuous;
      space_.bounds.assign(space_.observation_dim, DimRange{-M_PI, M_PI});
      break;
    case WrapperKind::DiscreteIndex:
    case WrapperKind::OneHot:
      if (inner_space_.kind != ObservationKind::DiscreteIndex) {
        throw ConfigError(std::string(wrapper_name(kind_)) +
                          " wrapper needs a discrete-index environment, got " + inner_->id());
      }
      space_.kind = ObservationKind::Continuous;
      space_.observation_dim = kind_ == WrapperKind::OneHot
                                   ? inner_space_.n_states
                                   : discrete_index_bits(inner_space_.n_states);
      space_.bounds.assign(space_.observation_dim,
                           DimRange{0.0, kind_ == WrapperKind::OneHot ? 1.0 : M_PI});
      break;
  }
}

std::vector<double> ObservationWrapper::transform(std::span<const double> raw) const {
  switch (kind_) {
    case WrapperKind::None:
      return {raw.begin(), raw.end()};
    case WrapperKind::Continuous:
      return wrap_continuous(raw, inner_space_.bounds);
    case WrapperKind::DiscreteIndex:
      return wrap_discrete_index(static_cast<std::size_t>(raw[0]), inner_space_.n_states);
    case WrapperKind::OneHot: {
      const auto idx = static_cast<std::size_t>(raw[0]);
      if (idx >= inner_space_.n_states) throw IndexError("state index out of range");
      std::vector<double> out(inner_space_.n_states, 0.0);
      out[idx] = 1.0;
      return out;
    }
  }
  return {};
}

std::vector<double> ObservationWrapper::reset(std::optional<std::uint64_t> seed) {
  return transform(inner_->reset(seed));
}

StepResult ObservationWrapper::step(std::size_t action) {
  StepResult r = inner_->step(action);
  r.observation = transform(r.observation);
  return r;
}

// ---------------------------------------------------------------- registry

namespace {

struct Registry {
  std::mutex mutex;
  std::map<std::string, EnvFactory> custom;
};

Registry& registry() {
  static Registry r;
  return r;
}

double number_param(const nlohmann::json& params, const char* key, double fallback) {
  if (!params.is_object() || !params.contains(key)) return fallback;
  const auto& v = params.at(key);
  if (!v.is_number()) throw ConfigError(std::string("env_params.") + key + " must be a number");
  return v.get<double>();
}

bool bool_param(const nlohmann::json& params, const char* key, bool fallback) {
  if (!params.is_object() || !params.contains(key)) return fallback;
  const auto& v = params.at(key);
  if (!v.is_boolean()) throw ConfigError(std::string("env_params.") + key + " must be a boolean");
  return v.get<bool>();
}

std::unique_ptr<Environment> make_builtin(const std::string& id, const nlohmann::json& params) {
  if (id == "cartpole") return std::make_unique<CartPole>();
  if (id == "frozenlake-4x4") return std::make_unique<FrozenLake>(bool_param(params, "slippery", false));

  static const std::regex sized(R"((tsp|knapsack)-(\d{1,3}))");
  std::smatch m;
  if (std::regex_match(id, m, sized)) {
    const int n = std::stoi(m[2].str());
    if (m[1] == "tsp") {
      if (n < 2 || n > 16) throw ConfigError("tsp size must lie in [2, 16]: " + id);
      return std::make_unique<Tsp>(n);
    }
    if (n < 1 || n > 20) throw ConfigError("knapsack size must lie in [1, 20]: " + id);
    const double penalty = number_param(params, "penalty", 1.0);
    if (!(penalty > 0.0)) throw ConfigError("env_params.penalty must be positive");
    return std::make_unique<Knapsack>(n, penalty);
  }
  return nullptr;
}

}  // namespace

void register_environment(const std::string& id, EnvFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.custom[id] = std::move(factory);
}

bool is_registered(const std::string& id) {
  {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    if (r.custom.count(id)) return true;
  }
  try {
    return make_builtin(id, nlohmann::json::object()) != nullptr;
  } catch (const ConfigError&) {
    return false;
  }
}

std::unique_ptr<Environment> make_environment(const std::string& id, const nlohmann::json& params) {
  EnvFactory factory;
  {
    auto& r = registry();
    std::lock_guard lock(r.mutex);
    if (auto it = r.custom.find(id); it != r.custom.end()) factory = it->second;
  }
  std::unique_ptr<Environment> env = factory ? factory(params) : make_builtin(id, params);
  if (!env) throw ConfigError("unknown environment id '" + id + "'");
  return env;
}

}  // namespace qrlforge::envs
