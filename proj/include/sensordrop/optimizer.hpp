#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sensordrop/error.hpp"
#include "sensordrop/tensor.hpp"

namespace sensordrop {

enum class OptimizerKind { SGD, Adam, RMSProp };

inline const char* optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::RMSProp: return "rmsprop";
  }
  return "?";
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;     // Adam
  double beta2 = 0.999;   // Adam
  double decay = 0.9;     // RMSProp
  double epsilon = 1e-8;
};

// Descent-direction optimizer over a fixed, ordered parameter list.
// Moment accumulators mirror the parameter shapes.
class Optimizer {
 public:
  Optimizer() = default;

  Optimizer(OptimizerConfig config, std::span<Tensor* const> params)
      : config_(config) {
    if (!(config.learning_rate >= 0.0)) {
      throw ConfigError("optimizer: learning rate must be nonnegative");
    }
    for (const Tensor* p : params) {
      if (config_.kind != OptimizerKind::SGD) second_.emplace_back(p->shape());
      if (config_.kind == OptimizerKind::Adam) first_.emplace_back(p->shape());
    }
    count_ = params.size();
  }

  const OptimizerConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }
  const TensorList& first_moments() const { return first_; }
  const TensorList& second_moments() const { return second_; }
  void set_learning_rate(double lr) {
    if (!(lr >= 0.0)) throw ConfigError("optimizer: learning rate must be nonnegative");
    config_.learning_rate = lr;
  }

  // p <- p - update(g). Throws DivergenceError (parameters untouched) if any
  // gradient is non-finite.
  void step(std::span<Tensor* const> params, const TensorList& grads) {
    if (params.size() != count_ || grads.size() != count_) {
      throw ShapeError("optimizer: expected " + std::to_string(count_) +
                       " parameter tensors, got " +
                       std::to_string(params.size()) + " params / " +
                       std::to_string(grads.size()) + " grads");
    }
    for (std::size_t i = 0; i < count_; ++i) {
      params[i]->require_same_shape(grads[i], "optimizer step");
      if (!grads[i].all_finite()) {
        throw DivergenceError("optimizer: non-finite gradient in parameter "
                              "tensor " + std::to_string(i) + " at step " +
                              std::to_string(steps_ + 1));
      }
    }
    ++steps_;
    const double lr = config_.learning_rate;
    switch (config_.kind) {
      case OptimizerKind::SGD:
        for (std::size_t i = 0; i < count_; ++i) {
          auto p = params[i]->data();
          auto g = grads[i].data();
          for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
        }
        break;
      case OptimizerKind::RMSProp: {
        const double rho = config_.decay;
        for (std::size_t i = 0; i < count_; ++i) {
          auto p = params[i]->data();
          auto g = grads[i].data();
          auto v = second_[i].data();
          for (std::size_t j = 0; j < p.size(); ++j) {
            v[j] = rho * v[j] + (1.0 - rho) * g[j] * g[j];
            p[j] -= lr * g[j] / (std::sqrt(v[j]) + config_.epsilon);
          }
        }
        break;
      }
      case OptimizerKind::Adam: {
        const double b1 = config_.beta1, b2 = config_.beta2;
        const double t = static_cast<double>(steps_);
        const double c1 = 1.0 - std::pow(b1, t);
        const double c2 = 1.0 - std::pow(b2, t);
        for (std::size_t i = 0; i < count_; ++i) {
          auto p = params[i]->data();
          auto g = grads[i].data();
          auto m = first_[i].data();
          auto v = second_[i].data();
          for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + config_.epsilon);
          }
        }
        break;
      }
    }
  }

 private:
  OptimizerConfig config_;
  std::size_t count_ = 0;
  std::uint64_t steps_ = 0;
  TensorList first_;
  TensorList second_;
};

}  // namespace sensordrop
