#include <algorithm>
#include <cmath>
#include <numeric>

#include "qrlforge/algorithms.hpp"
#include "qrlforge/error.hpp"

namespace qrlforge::algorithms {

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  if (rewards.empty()) throw ArgumentError("discounted_returns needs at least one reward");
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values,
                        double gamma, double lambda) {
  if (values.size() != rewards.size() + 1) {
    throw ArgumentError("gae needs " + std::to_string(rewards.size() + 1) + " values, got " +
                        std::to_string(values.size()));
  }
  std::vector<double> adv(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    acc = delta + gamma * lambda * acc;
    adv[t] = acc;
  }
  return adv;
}

double epsilon_at(std::uint64_t step, double start, double end, double decay_fraction,
                  std::uint64_t total_steps) {
  if (total_steps == 0) throw ArgumentError("epsilon schedule needs total_steps > 0");
  const double span = decay_fraction * static_cast<double>(total_steps);
  if (span <= 0.0) return end;
  const double frac = std::min(1.0, static_cast<double>(step) / span);
  return start + frac * (end - start);
}

std::vector<double> apply_mask(std::span<const double> values, const std::vector<bool>& mask) {
  std::vector<double> out(values.begin(), values.end());
  if (mask.empty()) return out;
  if (mask.size() != values.size()) throw ArgumentError("action mask size mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!mask[i]) out[i] = kMaskedLogit;
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

std::size_t masked_argmax(std::span<const double> values, const std::vector<bool>& mask) {
  if (!mask.empty() && mask.size() != values.size()) throw ArgumentError("action mask size mismatch");
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (best == values.size() || values[i] > values[best]) best = i;
  }
  if (best == values.size()) throw ArgumentError("no valid action");
  return best;
}

std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

std::size_t random_valid_action(const std::vector<bool>& mask, std::size_t n_actions, Rng& rng) {
  if (mask.empty()) return static_cast<std::size_t>(rng.below(n_actions));
  const auto valid = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (valid == 0) throw ArgumentError("no valid action");
  std::size_t k = static_cast<std::size_t>(rng.below(valid));
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] && k-- == 0) return i;
  }
  return 0;
}

// ------------------------------------------------------------------ replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ArgumentError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::optional<std::vector<const Transition*>> ReplayBuffer::sample(Rng& rng,
                                                                   std::size_t batch_size) const {
  if (batch_size == 0 || items_.size() < batch_size) return std::nullopt;
  std::vector<const Transition*> out(batch_size);
  for (auto& p : out) p = &items_[static_cast<std::size_t>(rng.below(items_.size()))];
  return out;
}

// --------------------------------------------------------------- optimizer

void Optimizer::step(agents::Agent& agent, std::span<double> grad) {
  if (max_grad_norm > 0.0) nn::clip_grad_norm(grad, max_grad_norm);
  nn::adam_step(adam, agent.parameters(), grad);
}

// --------------------------------------------------------------- reinforce

Baseline parse_baseline(const std::string& name) {
  if (name == "none") return Baseline::None;
  if (name == "mean") return Baseline::Mean;
  throw ConfigError("unknown baseline '" + name + "' (expected none or mean)");
}

std::vector<std::vector<double>> reinforce_advantages(const std::vector<Trajectory>& batch,
                                                      double gamma, Baseline baseline) {
  std::vector<std::vector<double>> adv;
  std::vector<double> all;
  for (const auto& tr : batch) {
    adv.push_back(discounted_returns(tr.rewards, gamma));
    all.insert(all.end(), adv.back().begin(), adv.back().end());
  }
  if (baseline == Baseline::Mean && !all.empty()) {
    const double mean = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
    double var = 0.0;
    for (double g : all) var += (g - mean) * (g - mean);
    const double sd = std::sqrt(var / static_cast<double>(all.size()));
    for (auto& a : adv) {
      for (auto& g : a) g = (g - mean) / (sd + 1e-8);
    }
  }
  return adv;
}

double reinforce_update(agents::Agent& agent, const std::vector<Trajectory>& batch, double gamma,
                        Baseline baseline, Optimizer& optimizer) {
  if (batch.empty()) throw ArgumentError("reinforce_update needs at least one trajectory");
  const auto adv = reinforce_advantages(batch, gamma, baseline);
  std::size_t n = 0;
  for (const auto& tr : batch) n += tr.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> grad(agent.parameter_count(), 0.0);
  double loss = 0.0;
  agents::OutputGradient og;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Trajectory& tr = batch[b];
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const auto out = agent.forward(tr.observations[t]);
      const std::vector<bool>& mask = t < tr.masks.size() ? tr.masks[t] : std::vector<bool>{};
      const auto probs = softmax(apply_mask(out.values, mask));
      const std::size_t a = tr.actions[t];
      const double A = adv[b][t];
      loss -= std::log(std::max(probs[a], 1e-300)) * A * inv_n;
      og.values.assign(probs.size(), 0.0);
      for (std::size_t k = 0; k < probs.size(); ++k) {
        og.values[k] = (probs[k] - (k == a ? 1.0 : 0.0)) * A * inv_n;
      }
      agent.accumulate_gradient(tr.observations[t], og, grad);
    }
  }
  optimizer.step(agent, grad);
  return loss;
}

// --------------------------------------------------------------------- dqn

double huber(double x, double delta) {
  const double a = std::abs(x);
  return a <= delta ? 0.5 * x * x : delta * (a - 0.5 * delta);
}

double dqn_target(agents::Agent& target, const Transition& t, double gamma) {
  const auto q = target.forward(t.next_observation).values;
  if (t.terminated) return t.reward;
  if (!t.next_mask.empty() && std::none_of(t.next_mask.begin(), t.next_mask.end(),
                                           [](bool b) { return b; })) {
    return t.reward;
  }
  return t.reward + gamma * q[masked_argmax(q, t.next_mask)];
}

double dqn_update(agents::Agent& online, agents::Agent& target,
                  std::span<const Transition* const> batch, double gamma, Optimizer& optimizer) {
  if (batch.empty()) throw ArgumentError("dqn_update needs a non-empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  std::vector<double> grad(online.parameter_count(), 0.0);
  double loss = 0.0;
  agents::OutputGradient og;
  for (const Transition* t : batch) {
    const double y = dqn_target(target, *t, gamma);
    const auto q = online.forward(t->observation).values;
    const double diff = q[t->action] - y;
    loss += huber(diff) * inv_b;
    og.values.assign(q.size(), 0.0);
    og.values[t->action] = std::clamp(diff, -1.0, 1.0) * inv_b;
    online.accumulate_gradient(t->observation, og, grad);
  }
  optimizer.step(online, grad);
  return loss;
}

// --------------------------------------------------------------------- ppo

double clipped_objective(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

PpoStats ppo_update(agents::Agent& agent, const Rollout& rollout, const PpoParams& params,
                    Optimizer& optimizer, Rng& rng) {
  const std::size_t n = rollout.size();
  if (n == 0) throw ArgumentError("ppo_update needs a non-empty rollout");
  if (params.epochs == 0 || params.minibatch_size == 0) {
    throw ArgumentError("ppo needs positive epochs and minibatch size");
  }

  std::vector<double> adv = rollout.advantages;
  if (params.normalize_advantages && n > 1) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n - 1));
    for (auto& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  PpoStats stats;
  std::size_t minibatches = 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(agent.parameter_count());
  agents::OutputGradient og;
  bool first = true;

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    }
    for (std::size_t start = 0; start < n; start += params.minibatch_size) {
      const std::size_t end = std::min(n, start + params.minibatch_size);
      const double inv_m = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double pl = 0.0, vl = 0.0, ent = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const auto out = agent.forward(rollout.observations[i]);
        if (!out.state_value) throw ArgumentError("ppo needs an agent with a value head");
        const std::vector<bool>& mask = rollout.masks[i];
        const auto probs = softmax(apply_mask(out.values, mask));
        const std::size_t a = rollout.actions[i];
        const double logp = std::log(std::max(probs[a], 1e-300));
        const double ratio = std::exp(logp - rollout.log_probs[i]);
        if (first) stats.first_ratio_deviation = std::max(stats.first_ratio_deviation, std::abs(ratio - 1.0));
        const double A = adv[i];

        // Policy loss -min(r A, clip(r) A); the gradient flows only through
        // the unclipped branch when it is the active one.
        const double unclipped = ratio * A;
        const double clipped = std::clamp(ratio, 1.0 - params.clip, 1.0 + params.clip) * A;
        pl -= std::min(unclipped, clipped) * inv_m;
        const double dratio = unclipped <= clipped ? -A * inv_m : 0.0;
        const double dlogp = dratio * ratio;

        double h = 0.0;
        for (std::size_t j = 0; j < probs.size(); ++j) {
          if (probs[j] > 0.0) h -= probs[j] * std::log(probs[j]);
        }
        ent += h * inv_m;

        og.values.assign(probs.size(), 0.0);
        for (std::size_t j = 0; j < probs.size(); ++j) {
          // d logp / d z_j = 1[j=a] - p_j;  d H / d z_j = -p_j (log p_j + H).
          const double dlp = (j == a ? 1.0 : 0.0) - probs[j];
          const double dh = probs[j] > 0.0 ? -probs[j] * (std::log(probs[j]) + h) : 0.0;
          og.values[j] = dlogp * dlp - params.entropy_coef * inv_m * dh;
        }
        const double verr = *out.state_value - rollout.returns[i];
        vl += 0.5 * verr * verr * inv_m;
        og.state_value = params.value_coef * verr * inv_m;
        agent.accumulate_gradient(rollout.observations[i], og, grad);
      }
      first = false;
      optimizer.step(agent, grad);
      stats.policy_loss += pl;
      stats.value_loss += vl;
      stats.entropy += ent;
      ++minibatches;
    }
  }
  const double inv = 1.0 / static_cast<double>(minibatches);
  stats.policy_loss *= inv;
  stats.value_loss *= inv;
  stats.entropy *= inv;
  stats.total_loss = stats.policy_loss + params.value_coef * stats.value_loss -
                     params.entropy_coef * stats.entropy;
  return stats;
}

}  // namespace qrlforge::algorithms
