#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>

#include "qrlforge/algorithms.hpp"
#include "qrlforge/error.hpp"

namespace qrlforge::algorithms {

Algorithm parse_algorithm(const std::string& name) {
  if (name == "reinforce") return Algorithm::Reinforce;
  if (name == "dqn") return Algorithm::Dqn;
  if (name == "ppo") return Algorithm::Ppo;
  throw ConfigError("unknown algorithm '" + name + "' (expected reinforce, dqn or ppo)");
}

const char* algorithm_name(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::Reinforce: return "reinforce";
    case Algorithm::Dqn: return "dqn";
    case Algorithm::Ppo: return "ppo";
  }
  return "?";
}

agents::HeadKind head_for(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::Reinforce: return agents::HeadKind::Policy;
    case Algorithm::Dqn: return agents::HeadKind::Value;
    case Algorithm::Ppo: return agents::HeadKind::ActorCritic;
  }
  return agents::HeadKind::Value;
}

std::vector<double> evaluate_greedy(envs::Environment& env, agents::Agent& agent,
                                    std::size_t episodes, std::uint64_t seed) {
  std::vector<double> returns;
  returns.reserve(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    auto obs = e == 0 ? env.reset(seed) : env.reset();
    double total = 0.0;
    for (;;) {
      const auto out = agent.forward(obs);
      const auto r = env.step(masked_argmax(out.values, env.action_mask()));
      total += r.reward;
      if (r.done()) break;
      obs = r.observation;
    }
    returns.push_back(total);
  }
  return returns;
}

namespace {

using Clock = std::chrono::steady_clock;

// Shared bookkeeping for the three loops: episode accounting, logging, stop
// conditions and periodic evaluation.
class Loop {
 public:
  Loop(const TrainSpec& spec, agents::Agent& agent, const TrainStreams& streams,
       metrics::JsonlSink& sink, const metrics::ExecutionCounter& counter, envs::Environment* eval_env)
      : spec_(spec), agent_(agent), streams_(streams), sink_(sink), counter_(counter),
        eval_env_(eval_env), start_(Clock::now()) {}

  bool budget_left() const {
    if (spec_.total_timesteps && steps_ >= *spec_.total_timesteps) return false;
    if (spec_.total_episodes && episodes_ >= *spec_.total_episodes) return false;
    return !stopped_;
  }

  void add_step(double reward) {
    ++steps_;
    ep_return_ += reward;
    ++ep_length_;
  }

  void add_loss(double loss) {
    loss_sum_ += loss;
    ++loss_count_;
    ++updates_;
  }

  // Logs the finished episode and evaluates stop conditions.
  void end_episode(std::optional<double> epsilon = std::nullopt) {
    metrics::MetricRecord r;
    r.episode = episodes_;
    r.global_step = steps_;
    r.episode_return = ep_return_;
    r.episode_length = ep_length_;
    if (loss_count_ > 0) r.loss = loss_sum_ / static_cast<double>(loss_count_);
    r.epsilon = epsilon;
    r.circuit_executions = counter_.count();
    r.wall_time_s = elapsed();
    sink_.write(r);

    recent_.push_back(ep_return_);
    if (recent_.size() > metrics::kFinalWindow) recent_.pop_front();
    ++episodes_;
    ep_return_ = 0.0;
    ep_length_ = 0;
    loss_sum_ = 0.0;
    loss_count_ = 0;

    if (spec_.stop_mean_return && recent_.size() == metrics::kFinalWindow &&
        recent_mean() >= *spec_.stop_mean_return) {
      stopped_ = true;
      stop_reason_ = "mean_return_reached";
    }
    if (eval_env_ && spec_.eval_interval > 0 && episodes_ % spec_.eval_interval == 0) evaluate();
  }

  double recent_mean() const {
    if (recent_.empty()) return 0.0;
    return std::accumulate(recent_.begin(), recent_.end(), 0.0) / static_cast<double>(recent_.size());
  }

  TrainResult finish() const {
    TrainResult res;
    res.episodes = episodes_;
    res.env_steps = steps_;
    res.updates = updates_;
    res.circuit_executions = counter_.count();
    res.final_return_mean = recent_mean();
    res.wall_time_s = elapsed();
    res.evaluations = evals_;
    if (stopped_) {
      res.stop_reason = stop_reason_;
    } else if (spec_.total_timesteps && steps_ >= *spec_.total_timesteps) {
      res.stop_reason = "total_timesteps";
    } else {
      res.stop_reason = "total_episodes";
    }
    return res;
  }

  std::uint64_t steps() const noexcept { return steps_; }
  std::uint64_t episodes() const noexcept { return episodes_; }

 private:
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  void evaluate() {
    auto probe = agent_.clone();
    probe->set_execution_counter(nullptr);
    const auto returns = evaluate_greedy(*eval_env_, *probe, spec_.eval_episodes,
                                         streams_.evaluation_seed + evals_.size());
    const double mean =
        returns.empty() ? 0.0
                        : std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
    evals_.push_back({episodes_, steps_, mean});
    if (spec_.eval_stop_return && mean >= *spec_.eval_stop_return) {
      stopped_ = true;
      stop_reason_ = "evaluation_return_reached";
    }
  }

  const TrainSpec& spec_;
  agents::Agent& agent_;
  const TrainStreams& streams_;
  metrics::JsonlSink& sink_;
  const metrics::ExecutionCounter& counter_;
  envs::Environment* eval_env_;
  Clock::time_point start_;

  std::uint64_t steps_ = 0, episodes_ = 0, updates_ = 0;
  double ep_return_ = 0.0;
  std::uint64_t ep_length_ = 0;
  double loss_sum_ = 0.0;
  std::size_t loss_count_ = 0;
  std::deque<double> recent_;
  std::vector<EvalPoint> evals_;
  bool stopped_ = false;
  std::string stop_reason_;
};

void train_dqn(const TrainSpec& spec, envs::Environment& env, agents::Agent& agent,
               const TrainStreams& streams, Loop& loop) {
  const DqnParams& p = spec.dqn;
  if (p.batch_size == 0 || p.train_frequency == 0 || p.target_sync_interval == 0) {
    throw ConfigError("dqn batch_size, train_frequency and target_sync_interval must be positive");
  }
  std::uint64_t horizon = p.epsilon_horizon;
  if (horizon == 0) {
    if (!spec.total_timesteps) {
      throw ConfigError("dqn with an episode budget needs algorithm_params.epsilon_horizon");
    }
    horizon = *spec.total_timesteps;
  }

  Rng explore(streams.exploration_seed);
  Rng replay_rng(streams.replay_seed);
  ReplayBuffer buffer(p.buffer_size);
  Optimizer opt(agent, spec.learning_rates, spec.max_grad_norm);
  auto target = agent.clone();
  const std::size_t n_actions = agent.num_actions();
  const std::uint64_t learning_starts = std::max<std::uint64_t>(p.learning_starts, p.batch_size);

  auto obs = env.reset(streams.env_seed);
  double eps = p.epsilon_start;
  while (loop.budget_left()) {
    const auto mask = env.action_mask();
    eps = epsilon_at(loop.steps(), p.epsilon_start, p.epsilon_end, p.epsilon_decay_fraction, horizon);
    const auto q = agent.forward(obs).values;
    const double u = explore.uniform();
    const std::size_t action =
        u < eps ? random_valid_action(mask, n_actions, explore) : masked_argmax(q, mask);

    auto r = env.step(action);
    buffer.push({obs, action, r.reward, r.observation, r.terminated, env.action_mask()});
    loop.add_step(r.reward);
    const std::uint64_t g = loop.steps();

    if (g >= learning_starts && g % p.train_frequency == 0) {
      if (auto batch = buffer.sample(replay_rng, p.batch_size)) {
        loop.add_loss(dqn_update(agent, *target, *batch, p.gamma, opt));
      }
    }
    if (g % p.target_sync_interval == 0) agents::sync_parameters(agent, *target);

    if (r.done()) {
      loop.end_episode(eps);
      if (!loop.budget_left()) break;
      obs = env.reset();
    } else {
      obs = std::move(r.observation);
    }
  }
}

void train_reinforce(const TrainSpec& spec, envs::Environment& env, agents::Agent& agent,
                     const TrainStreams& streams, Loop& loop) {
  const ReinforceParams& p = spec.reinforce;
  if (p.batch_episodes == 0) throw ConfigError("reinforce batch_episodes must be positive");
  Rng explore(streams.exploration_seed);
  Optimizer opt(agent, spec.learning_rates, spec.max_grad_norm);
  std::vector<Trajectory> batch;
  Trajectory tr;

  auto obs = env.reset(streams.env_seed);
  while (loop.budget_left()) {
    const auto mask = env.action_mask();
    const auto out = agent.forward(obs);
    const auto probs = softmax(apply_mask(out.values, mask));
    const std::size_t action = sample_categorical(probs, explore);
    auto r = env.step(action);
    tr.observations.push_back(std::move(obs));
    tr.actions.push_back(action);
    tr.rewards.push_back(r.reward);
    tr.masks.push_back(mask);
    tr.log_probs.push_back(std::log(std::max(probs[action], 1e-300)));
    loop.add_step(r.reward);

    if (r.done()) {
      batch.push_back(std::move(tr));
      tr = Trajectory{};
      if (batch.size() == p.batch_episodes) {
        loop.add_loss(reinforce_update(agent, batch, p.gamma, p.baseline, opt));
        batch.clear();
      }
      loop.end_episode();
      if (!loop.budget_left()) break;
      obs = env.reset();
    } else {
      obs = std::move(r.observation);
    }
  }
}

void train_ppo(const TrainSpec& spec, envs::Environment& env, agents::Agent& agent,
               const TrainStreams& streams, Loop& loop) {
  const PpoParams& p = spec.ppo;
  if (p.num_steps == 0) throw ConfigError("ppo num_steps must be positive");
  Rng explore(streams.exploration_seed);
  Rng shuffle(streams.replay_seed);
  Optimizer opt(agent, spec.learning_rates, spec.max_grad_norm);
  std::uint64_t n_updates = 0;
  if (spec.total_timesteps) n_updates = std::max<std::uint64_t>(1, *spec.total_timesteps / p.num_steps);
  std::uint64_t update = 0;

  auto obs = env.reset(streams.env_seed);
  while (loop.budget_left()) {
    Rollout ro;
    std::vector<double> rewards, values;
    // Segment boundaries: index one past the last step, and the bootstrap value.
    std::vector<std::pair<std::size_t, double>> segments;

    for (std::size_t t = 0; t < p.num_steps && loop.budget_left(); ++t) {
      const auto mask = env.action_mask();
      const auto out = agent.forward(obs);
      const auto probs = softmax(apply_mask(out.values, mask));
      const std::size_t action = sample_categorical(probs, explore);
      auto r = env.step(action);
      ro.observations.push_back(obs);
      ro.actions.push_back(action);
      ro.masks.push_back(mask);
      ro.log_probs.push_back(std::log(std::max(probs[action], 1e-300)));
      rewards.push_back(r.reward);
      values.push_back(out.state_value.value_or(0.0));
      loop.add_step(r.reward);

      if (r.done()) {
        double boot = 0.0;
        if (!r.terminated) boot = agent.forward(r.observation).state_value.value_or(0.0);
        segments.emplace_back(ro.size(), boot);
        loop.end_episode();
        if (!loop.budget_left()) break;
        obs = env.reset();
      } else {
        obs = std::move(r.observation);
      }
    }
    if (ro.size() == 0) break;
    if (segments.empty() || segments.back().first != ro.size()) {
      segments.emplace_back(ro.size(), agent.forward(obs).state_value.value_or(0.0));
    }

    ro.advantages.resize(ro.size());
    ro.returns.resize(ro.size());
    std::size_t begin = 0;
    for (const auto& [end, boot] : segments) {
      std::vector<double> v(values.begin() + static_cast<std::ptrdiff_t>(begin),
                            values.begin() + static_cast<std::ptrdiff_t>(end));
      v.push_back(boot);
      const auto a = gae(std::span<const double>(rewards).subspan(begin, end - begin), v, p.gamma,
                         p.gae_lambda);
      for (std::size_t i = begin; i < end; ++i) {
        ro.advantages[i] = a[i - begin];
        ro.returns[i] = a[i - begin] + values[i];
      }
      begin = end;
    }

    if (spec.anneal_lr && n_updates > 0) {
      opt.adam.lr_scale = std::max(0.0, 1.0 - static_cast<double>(update) / static_cast<double>(n_updates));
    }
    loop.add_loss(ppo_update(agent, ro, p, opt, shuffle).total_loss);
    ++update;
  }
}

}  // namespace

TrainResult train(const TrainSpec& spec, envs::Environment& env, agents::Agent& agent,
                  const TrainStreams& streams, metrics::JsonlSink& sink,
                  const metrics::ExecutionCounter& counter, envs::Environment* eval_env) {
  if (!spec.total_timesteps && !spec.total_episodes) {
    throw ConfigError("training needs total_timesteps or total_episodes");
  }
  if (agent.head() != head_for(spec.algorithm)) {
    throw ConfigError(std::string(algorithm_name(spec.algorithm)) + " needs a " +
                      agents::head_name(head_for(spec.algorithm)) + " agent");
  }
  Loop loop(spec, agent, streams, sink, counter, eval_env);
  if (!loop.budget_left()) return loop.finish();
  switch (spec.algorithm) {
    case Algorithm::Dqn: train_dqn(spec, env, agent, streams, loop); break;
    case Algorithm::Reinforce: train_reinforce(spec, env, agent, streams, loop); break;
    case Algorithm::Ppo: train_ppo(spec, env, agent, streams, loop); break;
  }
  return loop.finish();
}

}  // namespace qrlforge::algorithms
