#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sensordrop/environment.hpp"
#include "sensordrop/network.hpp"
#include "sensordrop/rng.hpp"

namespace sensordrop {

// Transmit probabilities are kept inside [kProbFloor, 1 - kProbFloor].
inline constexpr double kProbFloor = 1e-6;

inline double clamp_probability(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

struct AgentNetConfig {
  std::size_t channels_1 = 8;
  std::size_t channels_2 = 8;
  std::size_t kernel = 3;
};

// ConvP, ReLU, ConvP, ReLU, Dense(outputs) over an [N, H, W] state.
inline std::vector<Layer> agent_trunk(const Shape& state_shape, const AgentNetConfig& cfg,
                                      std::size_t outputs) {
  const std::size_t n = state_shape.at(0), h = state_shape.at(1), w = state_shape.at(2);
  std::vector<Layer> layers;
  append_convp(layers, n, cfg.channels_1, cfg.kernel);
  layers.emplace_back(ReLU{});
  append_convp(layers, cfg.channels_1, cfg.channels_2, cfg.kernel);
  layers.emplace_back(ReLU{});
  layers.emplace_back(Dense(cfg.channels_2 * (h / 4) * (w / 4), outputs));
  return layers;
}

// Actor: sigmoid head, one transmit probability per sensor.
struct ActorNet {
  Network net;
};

// Critic: linear head, scalar V(s).
struct CriticNet {
  Network net;
};

inline ActorNet make_actor(const Shape& state_shape, const AgentNetConfig& cfg, Rng& rng) {
  auto layers = agent_trunk(state_shape, cfg, state_shape.at(0));
  layers.emplace_back(Sigmoid{});
  ActorNet a{Network(state_shape, std::move(layers))};
  a.net.init(rng);
  return a;
}

inline CriticNet make_critic(const Shape& state_shape, const AgentNetConfig& cfg, Rng& rng) {
  CriticNet c{Network(state_shape, agent_trunk(state_shape, cfg, 1))};
  c.net.init(rng);
  return c;
}

inline std::vector<double> clamp_probabilities(const Tensor& raw) {
  std::vector<double> p(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) p[i] = clamp_probability(raw[i]);
  return p;
}

// Inference-only policy evaluation.
inline std::vector<double> policy_forward(const ActorNet& actor, const Tensor& state) {
  return clamp_probabilities(actor.net.predict(state));
}

// Independent Bernoulli draw per sensor.
inline ActionMask sample_action(const std::vector<double>& p, Rng& rng) {
  std::vector<bool> bits(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) bits[i] = rng.bernoulli(p[i]);
  return ActionMask(std::move(bits));
}

// Deterministic evaluation mode: transmit where p_i > 0.5.
inline ActionMask greedy_action(const std::vector<double>& p) {
  std::vector<bool> bits(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) bits[i] = p[i] > 0.5;
  return ActionMask(std::move(bits));
}

// log pi(mask | p) = sum_i [b_i log p_i + (1 - b_i) log(1 - p_i)]
inline double log_prob(const std::vector<double>& p, const ActionMask& mask) {
  if (p.size() != mask.size()) throw ShapeError("log_prob: p and mask lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = clamp_probability(p[i]);
    s += mask[i] ? std::log(q) : std::log1p(-q);
  }
  return s;
}

// d log pi / d p_i
inline Tensor log_prob_gradient(const std::vector<double>& p, const ActionMask& mask) {
  Tensor g({p.size()});
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = clamp_probability(p[i]);
    g[i] = mask[i] ? 1.0 / q : -1.0 / (1.0 - q);
  }
  return g;
}

}  // namespace sensordrop
