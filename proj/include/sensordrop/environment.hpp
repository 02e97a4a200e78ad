#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sensordrop/error.hpp"
#include "sensordrop/network.hpp"
#include "sensordrop/optimizer.hpp"
#include "sensordrop/scene.hpp"

namespace sensordrop {

// Which sensors forward their features to the cloud (1) or drop (0).
class ActionMask {
 public:
  ActionMask() = default;
  explicit ActionMask(std::vector<bool> bits) : bits_(std::move(bits)) {}

  static ActionMask all_ones(std::size_t n) { return ActionMask(std::vector<bool>(n, true)); }
  static ActionMask all_zeros(std::size_t n) { return ActionMask(std::vector<bool>(n, false)); }

  // Bit i of `index` is sensor i.
  static ActionMask from_index(std::uint64_t index, std::size_t n) {
    std::vector<bool> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = (index >> i) & 1u;
    return ActionMask(std::move(b));
  }

  // "101" -> sensors 0 and 2 on.
  static ActionMask parse(std::string_view s) {
    std::vector<bool> b;
    for (char c : s) {
      if (c != '0' && c != '1') throw ContractViolation("mask string must be 0/1");
      b.push_back(c == '1');
    }
    return ActionMask(std::move(b));
  }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool on) { bits_.at(i) = on; }
  const std::vector<bool>& bits() const { return bits_; }

  std::size_t d_active() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
  }

  std::uint64_t to_index() const {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      if (bits_[i]) v |= std::uint64_t{1} << i;
    }
    return v;
  }

  std::string to_string() const {
    std::string s;
    for (bool b : bits_) s.push_back(b ? '1' : '0');
    return s;
  }

  friend bool operator==(const ActionMask&, const ActionMask&) = default;

 private:
  std::vector<bool> bits_;
};

struct EnvConfig {
  std::size_t feature_channels = 8;  // C of F(X_i)
  std::size_t kernel = 3;
  bool shared_sensor_weights = true;
  std::size_t cloud_channels_1 = 16;
  std::size_t cloud_channels_2 = 16;
};

// Per-sensor feature extractor: one ConvP block plus ReLU.
// image [1, S, S] -> feature [C, S/2, S/2].
struct SensorModel {
  std::size_t num_sensors = 0;
  bool shared = true;
  std::vector<Network> nets;  // one if shared, otherwise one per sensor

  const Network& net_for(std::size_t sensor) const { return shared ? nets[0] : nets.at(sensor); }
  Network& net_for(std::size_t sensor) { return shared ? nets[0] : nets.at(sensor); }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (auto& n : nets) {
      for (Tensor* t : n.parameters()) out.push_back(t);
    }
    return out;
  }
};

inline Network make_sensor_net(std::size_t image_size, const EnvConfig& cfg) {
  std::vector<Layer> layers;
  append_convp(layers, 1, cfg.feature_channels, cfg.kernel);
  layers.emplace_back(ReLU{});
  return Network({1, image_size, image_size}, std::move(layers));
}

inline SensorModel make_sensor_model(std::size_t num_sensors, std::size_t image_size,
                                     const EnvConfig& cfg, Rng& rng) {
  SensorModel m;
  m.num_sensors = num_sensors;
  m.shared = cfg.shared_sensor_weights;
  const std::size_t count = m.shared ? 1 : num_sensors;
  for (std::size_t i = 0; i < count; ++i) {
    m.nets.push_back(make_sensor_net(image_size, cfg));
    m.nets.back().init(rng);
  }
  return m;
}

// Cloud classifier: conv, conv, max pool, dense(4), softmax.
struct CloudModel {
  Network net;
};

inline Network make_cloud_net(const Shape& feature_shape, const EnvConfig& cfg) {
  const std::size_t c = feature_shape.at(0);
  const std::size_t h = feature_shape.at(1), w = feature_shape.at(2);
  std::vector<Layer> layers;
  layers.emplace_back(Conv2D(c, cfg.cloud_channels_1, cfg.kernel));
  layers.emplace_back(ReLU{});
  layers.emplace_back(Conv2D(cfg.cloud_channels_1, cfg.cloud_channels_2, cfg.kernel));
  layers.emplace_back(MaxPool2D{2});
  layers.emplace_back(ReLU{});
  layers.emplace_back(Dense(cfg.cloud_channels_2 * (h / 2) * (w / 2), kNumClasses));
  layers.emplace_back(Softmax{});
  return Network(feature_shape, std::move(layers));
}

inline CloudModel make_cloud_model(const Shape& feature_shape, const EnvConfig& cfg, Rng& rng) {
  CloudModel m{make_cloud_net(feature_shape, cfg)};
  m.net.init(rng);
  return m;
}

// Sensors plus cloud: the RL environment.
struct Environment {
  SensorModel sensors;
  CloudModel cloud;

  std::size_t num_sensors() const { return sensors.num_sensors; }
  const Shape& feature_shape() const { return sensors.nets.at(0).output_shape(); }
};

inline Environment make_environment(std::size_t num_sensors, std::size_t image_size,
                                    const EnvConfig& cfg, Rng& rng) {
  Environment env;
  env.sensors = make_sensor_model(num_sensors, image_size, cfg, rng);
  env.cloud = make_cloud_model(env.sensors.nets[0].output_shape(), cfg, rng);
  return env;
}

struct SensorOutput {
  Tensor feature;  // F(X_i), [C, H, W]
  Tensor summary;  // G(X_i), [1, H, W]
};

// Elementwise mean over channels.
inline Tensor channel_mean(const Tensor& feature) {
  const std::size_t c = feature.dim(0), h = feature.dim(1), w = feature.dim(2);
  Tensor out({1, h, w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < h * w; ++i) out[i] += feature[k * h * w + i];
  }
  for (double& v : out.data()) v /= static_cast<double>(c);
  return out;
}

inline std::vector<SensorOutput> sense(const Scene& scene, const SensorModel& sensors) {
  if (scene.views.size() != sensors.num_sensors) {
    throw ShapeError("sense: scene has " + std::to_string(scene.views.size()) +
                     " views, model expects " + std::to_string(sensors.num_sensors));
  }
  std::vector<SensorOutput> out;
  out.reserve(scene.views.size());
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    Tensor f = sensors.net_for(i).predict(scene.views[i]);
    Tensor g = channel_mean(f);
    out.push_back({std::move(f), std::move(g)});
  }
  return out;
}

// Stacks the summaries into the [N, H, W] agent state.
inline Tensor assemble_state(std::span<const SensorOutput> outputs) {
  if (outputs.empty()) throw ShapeError("assemble_state: no sensors");
  const Tensor& g0 = outputs[0].summary;
  const std::size_t hw = g0.size();
  Tensor s({outputs.size(), g0.dim(1), g0.dim(2)});
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    outputs[i].summary.require_same_shape(g0, "assemble_state");
    std::copy(outputs[i].summary.data().begin(), outputs[i].summary.data().end(),
              s.data().begin() + static_cast<std::ptrdiff_t>(i * hw));
  }
  return s;
}

// Masked mean of the selected features: sum_{i on} F_i / d_active.
inline Tensor fuse(std::span<const Tensor> features, const ActionMask& mask) {
  if (features.size() != mask.size()) {
    throw ShapeError("fuse: " + std::to_string(features.size()) + " features vs mask of " +
                     std::to_string(mask.size()));
  }
  const std::size_t d = mask.d_active();
  if (d == 0) throw DegenerateAction("fuse: no sensor selected");
  Tensor out(features[0].shape());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (mask[i]) out += features[i];
  }
  const double n = static_cast<double>(d);
  for (double& v : out.data()) v /= n;
  return out;
}

inline Tensor fuse(std::span<const SensorOutput> outputs, const ActionMask& mask) {
  std::vector<Tensor> f;
  f.reserve(outputs.size());
  for (const auto& o : outputs) f.push_back(o.feature);
  return fuse(std::span<const Tensor>(f), mask);
}

// Index of the largest entry; ties go to the smallest index.
inline std::size_t argmax_first(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

struct Classification {
  std::uint8_t label = 0;
  std::array<double, kNumClasses> probabilities{};
};

inline Classification classify_probabilities(const Tensor& probs) {
  Classification c;
  c.label = static_cast<std::uint8_t>(argmax_first(probs.data()));
  std::copy_n(probs.data().begin(), kNumClasses, c.probabilities.begin());
  return c;
}

inline Classification classify(const CloudModel& cloud, const Tensor& fused) {
  return classify_probabilities(cloud.net.predict(fused));
}

// ---------------------------------------------------------------------------
// Supervised pretraining of sensors + cloud with every sensor transmitting.

struct PretrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 50;
  double learning_rate = 1e-3;  // Adam
  std::size_t patience = 5;     // epochs without test-accuracy gain; 0 disables
  std::uint64_t seed = 0;       // shuffling, and reported on divergence
};

struct PretrainEpoch {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

struct PretrainHistory {
  double initial_train_acc = 0.0;
  double initial_test_acc = 0.0;
  std::size_t steps_per_epoch = 0;
  std::size_t optimizer_steps = 0;
  std::vector<double> step_losses;  // mean batch loss per optimizer step
  std::vector<PretrainEpoch> epochs;
  bool early_stopped = false;

  double final_test_acc() const {
    return epochs.empty() ? initial_test_acc : epochs.back().test_acc;
  }
};

inline double cross_entropy(const Tensor& probs, std::size_t target, Tensor* grad) {
  constexpr double kFloor = 1e-15;
  const double p = std::max(probs[target], kFloor);
  if (grad) {
    *grad = Tensor(probs.shape());
    (*grad)[target] = -1.0 / p;
  }
  return -std::log(p);
}

// Accuracy with every sensor transmitting.
inline double all_sensor_accuracy(const Environment& env, std::span<const Scene> scenes) {
  if (scenes.empty()) return 0.0;
  std::size_t correct = 0;
  const auto ones = ActionMask::all_ones(env.num_sensors());
  for (const auto& s : scenes) {
    const auto out = sense(s, env.sensors);
    if (classify(env.cloud, fuse(std::span<const SensorOutput>(out), ones)).label == s.label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(scenes.size());
}

// Parameters of sensors then cloud, in the order joint_gradient fills them.
inline std::vector<Tensor*> joint_parameters(Environment& env) {
  std::vector<Tensor*> params = env.sensors.parameters();
  for (Tensor* t : env.cloud.net.parameters()) params.push_back(t);
  return params;
}

// Cross-entropy of the cloud's prediction on `scene` fused under `mask`;
// adds d(loss)/d(param) into `grads` (laid out as joint_parameters) and
// reports whether the prediction was correct.
inline double joint_gradient(const Environment& env, const Scene& scene, const ActionMask& mask,
                             TensorList& grads, bool* correct = nullptr) {
  const std::size_t n = env.num_sensors();
  const std::size_t d = mask.d_active();
  if (d == 0) throw DegenerateAction("joint_gradient: no sensor selected");
  std::vector<ForwardCache> caches(n);
  std::vector<Tensor> feats;
  feats.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    feats.push_back(env.sensors.net_for(i).forward(scene.views[i], caches[i]));
  }
  ForwardCache cloud_cache;
  const Tensor probs = env.cloud.net.forward(fuse(std::span<const Tensor>(feats), mask), cloud_cache);
  Tensor g;
  const double loss = cross_entropy(probs, scene.label, &g);
  if (correct) *correct = argmax_first(probs.data()) == scene.label;
  if (!std::isfinite(loss)) return loss;

  std::size_t sensor_params = 0;
  for (const auto& net : env.sensors.nets) sensor_params += net.parameters().size();
  const Gradients cg = env.cloud.net.backward(cloud_cache, g);
  for (std::size_t j = 0; j < cg.params.size(); ++j) grads[sensor_params + j] += cg.params[j];
  Tensor gf = cg.input;
  gf *= 1.0 / static_cast<double>(d);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const Gradients sg = env.sensors.net_for(i).backward(caches[i], gf);
    const std::size_t base = env.sensors.shared ? 0 : i * sg.params.size();
    for (std::size_t j = 0; j < sg.params.size(); ++j) grads[base + j] += sg.params[j];
  }
  return loss;
}

inline PretrainHistory pretrain(Environment& env, const DatasetSplit& split,
                                const PretrainConfig& cfg) {
  if (cfg.batch_size == 0) throw ConfigError("pretrain: batch_size must be positive");
  const std::size_t n = env.num_sensors();
  std::vector<Tensor*> params = joint_parameters(env);
  Optimizer opt({OptimizerKind::Adam, cfg.learning_rate}, params);

  PretrainHistory hist;
  hist.initial_train_acc = all_sensor_accuracy(env, split.train);
  hist.initial_test_acc = all_sensor_accuracy(env, split.test);
  const std::size_t m = split.train.size();
  hist.steps_per_epoch = (m + cfg.batch_size - 1) / cfg.batch_size;

  Rng rng(derive_seed(cfg.seed, "pretrain"));
  std::vector<std::size_t> order(m);
  const auto ones = ActionMask::all_ones(n);
  double best_test = hist.initial_test_acc;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    std::size_t epoch_correct = 0;

    for (std::size_t b0 = 0; b0 < m; b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(m, b0 + cfg.batch_size);
      TensorList grads;
      for (const Tensor* t : params) grads.emplace_back(t->shape());
      double batch_loss = 0.0;

      for (std::size_t k = b0; k < b1; ++k) {
        bool correct = false;
        const double loss = joint_gradient(env, split.train[order[k]], ones, grads, &correct);
        if (!std::isfinite(loss)) {
          throw DivergenceError("pretrain: non-finite loss (seed " + std::to_string(cfg.seed) +
                                ", epoch " + std::to_string(epoch) + ")");
        }
        batch_loss += loss;
        if (correct) ++epoch_correct;
      }
      const double bs = static_cast<double>(b1 - b0);
      scale(grads, 1.0 / bs);
      try {
        opt.step(params, grads);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " (pretrain seed " +
                              std::to_string(cfg.seed) + ", epoch " + std::to_string(epoch) + ")");
      }
      ++hist.optimizer_steps;
      hist.step_losses.push_back(batch_loss / bs);
      epoch_loss += batch_loss;
    }

    PretrainEpoch rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(m);
    rec.train_acc = static_cast<double>(epoch_correct) / static_cast<double>(m);
    rec.test_acc = all_sensor_accuracy(env, split.test);
    hist.epochs.push_back(rec);

    if (rec.test_acc > best_test) {
      best_test = rec.test_acc;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      hist.early_stopped = true;
      break;
    }
  }
  return hist;
}

// ---------------------------------------------------------------------------
// Frozen environment used during agent training and evaluation.

// A scene pushed through the (frozen) sensors once.
struct EncodedScene {
  std::uint8_t label = 0;
  std::vector<Tensor> features;  // F(X_i)
  Tensor state;                  // stacked G(X_i), [N, H, W]
};

inline EncodedScene encode_scene(const Scene& scene, const SensorModel& sensors) {
  auto outputs = sense(scene, sensors);
  EncodedScene e;
  e.label = scene.label;
  e.state = assemble_state(outputs);
  e.features.reserve(outputs.size());
  for (auto& o : outputs) e.features.push_back(std::move(o.feature));
  return e;
}

struct StepOutcome {
  bool correct = false;
  int predicted = -1;  // -1 when nothing was transmitted
  std::size_t d_active = 0;
};

// Classifies encoded scenes under arbitrary masks, memoising the cloud's
// answer per (scene, mask) because the environment does not change.
class FrozenEnvironment {
 public:
  FrozenEnvironment(const Environment& env, std::span<const Scene> scenes) : cloud_(env.cloud) {
    encoded_.reserve(scenes.size());
    for (const auto& s : scenes) encoded_.push_back(encode_scene(s, env.sensors));
    memo_.resize(scenes.size());
    num_sensors_ = env.num_sensors();
  }

  std::size_t size() const { return encoded_.size(); }
  std::size_t num_sensors() const { return num_sensors_; }
  const EncodedScene& scene(std::size_t i) const { return encoded_.at(i); }
  const Tensor& state(std::size_t i) const { return encoded_.at(i).state; }
  std::uint8_t label(std::size_t i) const { return encoded_.at(i).label; }
  void observe(std::size_t, const ActionMask&) {}

  // An all-zero mask sends nothing to the cloud and counts as incorrect.
  StepOutcome evaluate(std::size_t i, const ActionMask& mask) {
    StepOutcome o;
    o.d_active = mask.d_active();
    if (o.d_active == 0) return o;
    auto& memo = memo_.at(i);
    const auto key = mask.to_index();
    auto it = memo.find(key);
    if (it == memo.end()) {
      const auto& e = encoded_[i];
      const auto c = classify(cloud_, fuse(std::span<const Tensor>(e.features), mask));
      it = memo.emplace(key, c.label).first;
    }
    o.predicted = it->second;
    o.correct = it->second == encoded_[i].label;
    return o;
  }

 private:
  CloudModel cloud_;
  std::vector<EncodedScene> encoded_;
  std::vector<std::unordered_map<std::uint64_t, std::uint8_t>> memo_;
  std::size_t num_sensors_ = 0;
};

// Unfrozen variant for studying joint adaptation: sensors and cloud keep
// training (Adam, cross-entropy on the masked fusion) on every decision the
// agent takes. Nothing is cached because the models move.
class AdaptiveEnvironment {
 public:
  AdaptiveEnvironment(Environment& env, std::span<const Scene> scenes, double learning_rate)
      : env_(env), scenes_(scenes) {
    params_ = joint_parameters(env_);
    opt_ = Optimizer({OptimizerKind::Adam, learning_rate}, params_);
  }

  std::size_t size() const { return scenes_.size(); }
  std::size_t num_sensors() const { return env_.num_sensors(); }
  std::uint8_t label(std::size_t i) const { return scenes_[i].label; }

  Tensor state(std::size_t i) const {
    const auto out = sense(scenes_[i], env_.sensors);
    return assemble_state(out);
  }

  StepOutcome evaluate(std::size_t i, const ActionMask& mask) const {
    StepOutcome o;
    o.d_active = mask.d_active();
    if (o.d_active == 0) return o;
    const auto out = sense(scenes_[i], env_.sensors);
    const auto c = classify(env_.cloud, fuse(std::span<const SensorOutput>(out), mask));
    o.predicted = c.label;
    o.correct = c.label == scenes_[i].label;
    return o;
  }

  // One supervised step on scene i fused under `mask`.
  void observe(std::size_t i, const ActionMask& mask) {
    if (mask.d_active() == 0) return;
    TensorList grads;
    for (const Tensor* t : params_) grads.emplace_back(t->shape());
    if (!std::isfinite(joint_gradient(env_, scenes_[i], mask, grads))) {
      throw DivergenceError("adaptive environment: non-finite loss");
    }
    opt_.step(params_, grads);
  }

 private:
  Environment& env_;
  std::span<const Scene> scenes_;
  std::vector<Tensor*> params_;
  Optimizer opt_;
};

}  // namespace sensordrop
