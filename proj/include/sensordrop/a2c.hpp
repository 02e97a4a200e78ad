#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "sensordrop/environment.hpp"
#include "sensordrop/optimizer.hpp"
#include "sensordrop/policy.hpp"
#include "sensordrop/reward.hpp"

namespace sensordrop {

struct TrainConfig {
  std::size_t epochs = 3000;
  double alpha = 1e-4;  // actor learning rate
  double beta = 1e-4;   // critic learning rate
  double gamma = 0.99;  // only reaches the update through V(s') (== 0 here)
  OptimizerKind optimizer = OptimizerKind::RMSProp;
  std::size_t batch_size = 1;  // >1 averages gradients over B decisions
  bool shuffle = true;
  std::uint64_t seed = 0;
  RewardConfig reward;
};

// Actor + critic with their optimizers. The single-step update follows the
// usual A2C recipe: the actor ascends A * grad log pi(a|s), the critic
// descends 1/2 (R + gamma V(s') - V(s))^2, whose gradient is -A grad V(s).
class A2CAgent {
 public:
  A2CAgent(ActorNet actor, CriticNet critic, OptimizerKind kind, double alpha, double beta)
      : actor_(std::move(actor)), critic_(std::move(critic)) {
    actor_opt_ = Optimizer({kind, alpha}, actor_.net.parameters());
    critic_opt_ = Optimizer({kind, beta}, critic_.net.parameters());
    actor_grads_ = actor_.net.zero_grads();
    critic_grads_ = critic_.net.zero_grads();
  }

  static A2CAgent create(const Shape& state_shape, const AgentNetConfig& net_cfg,
                         const TrainConfig& cfg, Rng& rng) {
    auto actor = make_actor(state_shape, net_cfg, rng);
    auto critic = make_critic(state_shape, net_cfg, rng);
    return A2CAgent(std::move(actor), std::move(critic), cfg.optimizer, cfg.alpha, cfg.beta);
  }

  const ActorNet& actor() const { return actor_; }
  const CriticNet& critic() const { return critic_; }
  ActorNet& actor() { return actor_; }
  CriticNet& critic() { return critic_; }

  void set_learning_rates(double alpha, double beta) {
    actor_opt_.set_learning_rate(alpha);
    critic_opt_.set_learning_rate(beta);
  }

  // Forward passes that the next update() differentiates through.
  std::vector<double> act(const Tensor& state) {
    auto p = clamp_probabilities(actor_.net.forward(state, actor_cache_));
    last_p_ = p;
    return p;
  }

  double evaluate_value(const Tensor& state) {
    return critic_.net.forward(state, critic_cache_)[0];
  }

  // Adds this decision's gradients to the pending batch.
  void accumulate(const Tensor& state, const ActionMask& mask, const AdvantageRecord& rec) {
    require_cached(state);
    const double a = rec.advantage;
    if (!std::isfinite(a)) throw DivergenceError("a2c: non-finite advantage");

    // actor: minimise -A log pi
    Tensor gp = log_prob_gradient(last_p_, mask);
    gp *= -a;
    accumulate_into(actor_grads_, actor_.net.backward(actor_cache_, gp).params);

    // critic: minimise 1/2 (target - V)^2, dL/dV = -A
    Tensor gv({1}, -a);
    accumulate_into(critic_grads_, critic_.net.backward(critic_cache_, gv).params);
    ++pending_;
  }

  // Applies the averaged pending gradients. No-op when nothing is pending.
  void apply() {
    if (pending_ == 0) return;
    const double inv = 1.0 / static_cast<double>(pending_);
    scale(actor_grads_, inv);
    scale(critic_grads_, inv);
    critic_opt_.step(critic_.net.parameters(), critic_grads_);
    actor_opt_.step(actor_.net.parameters(), actor_grads_);
    for (auto& t : actor_grads_) t.fill(0.0);
    for (auto& t : critic_grads_) t.fill(0.0);
    pending_ = 0;
  }

  // One-sample update with explicit learning rates.
  void update(const Tensor& state, const ActionMask& mask, const AdvantageRecord& rec,
              double alpha, double beta) {
    set_learning_rates(alpha, beta);
    accumulate(state, mask, rec);
    apply();
  }

  std::size_t pending() const { return pending_; }

 private:
  void require_cached(const Tensor& state) const {
    if (!actor_cache_.valid() || !critic_cache_.valid() ||
        !(actor_cache_.activations[0] == state) || !(critic_cache_.activations[0] == state)) {
      throw UsageError("a2c update: act() and evaluate_value() must run on this state first");
    }
  }

  static void accumulate_into(TensorList& into, const TensorList& add) {
    if (!all_finite(add)) throw DivergenceError("a2c: non-finite gradient");
    sensordrop::accumulate(into, add);
  }

  ActorNet actor_;
  CriticNet critic_;
  Optimizer actor_opt_;
  Optimizer critic_opt_;
  ForwardCache actor_cache_;
  ForwardCache critic_cache_;
  std::vector<double> last_p_;
  TensorList actor_grads_;
  TensorList critic_grads_;
  std::size_t pending_ = 0;
};

// Per-epoch training metrics, averaged over the sampled decisions.
struct ExperimentRecord {
  std::size_t epoch = 0;
  double mean_reward_raw = 0.0;
  double mean_reward_normalized = 0.0;
  double accuracy = 0.0;
  double comm_overhead = 0.0;  // mean d_active / N
};

struct StepLog {
  std::size_t epoch = 0;
  std::size_t scene = 0;
  ActionMask mask;
  StepOutcome outcome;
  AdvantageRecord record;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(const ExperimentRecord&)> on_epoch;
};

// Single-step episodes: every training scene is one decision with no
// successor state, so V(s') = 0.
//
// Env provides size(), num_sensors(), state(i), evaluate(i, mask) and
// observe(i, mask); see FrozenEnvironment and AdaptiveEnvironment.
template <class Env>
std::vector<ExperimentRecord> train(A2CAgent& agent, Env& env, const TrainConfig& cfg,
                                    const TrainHooks& hooks = {}) {
  cfg.reward.validate();
  if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  agent.set_learning_rates(cfg.alpha, cfg.beta);
  const std::size_t m = env.size();
  const std::size_t n = env.num_sensors();
  Rng rng(derive_seed(cfg.seed, "agent-train"));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<ExperimentRecord> history;
  history.reserve(cfg.epochs);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(order.begin(), order.end());
    double sum_raw = 0.0, sum_norm = 0.0;
    std::size_t correct = 0, sent = 0;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = order[k];
      const Tensor& state = env.state(i);
      try {
        const auto p = agent.act(state);
        const ActionMask mask = sample_action(p, rng);
        const StepOutcome out = env.evaluate(i, mask);
        const double r = reward(cfg.reward, out.correct, out.d_active, n);
        const double v = agent.evaluate_value(state);
        if (!std::isfinite(v)) throw DivergenceError("critic produced a non-finite value");
        const AdvantageRecord rec = advantage(r, v, 0.0, cfg.gamma);
        agent.accumulate(state, mask, rec);
        if (agent.pending() >= cfg.batch_size) agent.apply();
        env.observe(i, mask);

        sum_raw += r;
        sum_norm += normalize_reward(cfg.reward, r, n);
        correct += out.correct ? 1 : 0;
        sent += out.d_active;
        if (hooks.on_step) hooks.on_step({epoch, i, mask, out, rec});
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " (agent seed " + std::to_string(cfg.seed) +
                              ", epoch " + std::to_string(epoch) + ", sample " +
                              std::to_string(i) + ")");
      }
    }
    agent.apply();
    ExperimentRecord rec;
    rec.epoch = epoch;
    const double md = static_cast<double>(m);
    rec.mean_reward_raw = sum_raw / md;
    rec.mean_reward_normalized = sum_norm / md;
    rec.accuracy = static_cast<double>(correct) / md;
    rec.comm_overhead = static_cast<double>(sent) / (md * static_cast<double>(n));
    history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  return history;
}

struct Decision {
  std::size_t scene = 0;
  std::uint8_t label = 0;
  ActionMask mask;
  StepOutcome outcome;
};

struct PolicyEvaluation {
  double accuracy = 0.0;
  double comm_overhead = 0.0;
  double mean_reward_raw = 0.0;
  double mean_reward_normalized = 0.0;
  std::vector<Decision> decisions;
};

// Scores a fixed mask rule over every scene of `env`.
template <class Env, class MaskFn>
PolicyEvaluation evaluate_masks(Env& env, const RewardConfig& reward_cfg,
                                MaskFn&& mask_for) {
  PolicyEvaluation ev;
  const std::size_t n = env.num_sensors();
  std::size_t correct = 0, sent = 0;
  for (std::size_t i = 0; i < env.size(); ++i) {
    ActionMask mask = mask_for(i);
    const StepOutcome out = env.evaluate(i, mask);
    const double r = reward(reward_cfg, out.correct, out.d_active, n);
    ev.mean_reward_raw += r;
    ev.mean_reward_normalized += normalize_reward(reward_cfg, r, n);
    correct += out.correct ? 1 : 0;
    sent += out.d_active;
    ev.decisions.push_back({i, env.label(i), std::move(mask), out});
  }
  if (env.size() > 0) {
    const double m = static_cast<double>(env.size());
    ev.accuracy = static_cast<double>(correct) / m;
    ev.comm_overhead = static_cast<double>(sent) / (m * static_cast<double>(n));
    ev.mean_reward_raw /= m;
    ev.mean_reward_normalized /= m;
  }
  return ev;
}

template <class Env>
PolicyEvaluation evaluate_greedy(const ActorNet& actor, Env& env, const RewardConfig& reward_cfg) {
  return evaluate_masks(env, reward_cfg, [&](std::size_t i) {
    return greedy_action(policy_forward(actor, env.state(i)));
  });
}

}  // namespace sensordrop
