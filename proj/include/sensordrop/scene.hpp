#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sensordrop/error.hpp"
#include "sensordrop/rng.hpp"
#include "sensordrop/tensor.hpp"

namespace sensordrop {

inline constexpr std::size_t kNumClasses = 4;

enum class ObjectClass : std::uint8_t { Car = 0, Bus = 1, Person = 2, None = 3 };

inline const char* class_name(std::size_t label) {
  static constexpr std::array<const char*, kNumClasses> names = {
      "car", "bus", "person", "no-object"};
  return label < kNumClasses ? names[label] : "?";
}

// One synthetic multi-view sample: N single-channel views of the same
// moment plus which views actually contain the object.
struct Scene {
  std::uint8_t label = 0;
  std::vector<Tensor> views;     // each [1, H, W], values in [0, 1]
  std::vector<bool> visibility;  // object present in view i

  std::size_t num_sensors() const { return views.size(); }
  std::size_t visible_count() const {
    return static_cast<std::size_t>(
        std::count(visibility.begin(), visibility.end(), true));
  }
  friend bool operator==(const Scene&, const Scene&) = default;
};

// Generator geometry and noise settings.
struct SynthConfig {
  std::size_t num_sensors = 6;
  std::size_t image_size = 32;
  std::array<double, kNumClasses> class_distribution = {0.25, 0.25, 0.25, 0.25};
  // Per-sensor probability that an object in the scene falls inside the
  // sensor's field of view. Uneven on purpose: some placements are better.
  std::vector<double> placement_quality = {0.5, 0.6, 0.75, 0.4, 0.3, 0.45};
  double background_amplitude = 0.1;
  double intensity_min = 0.6;
  double intensity_max = 1.0;
  double pixel_noise = 0.05;
  double world_spread = 5.0;  // px shift per unit of world position
  double view_jitter = 2.0;   // px, per view
  double scale_min = 0.8;
  double scale_max = 1.2;

  static SynthConfig for_sensors(std::size_t n) {
    SynthConfig c;
    const std::vector<double> base = c.placement_quality;
    c.num_sensors = n;
    c.placement_quality.resize(n);
    for (std::size_t i = 0; i < n; ++i) c.placement_quality[i] = base[i % base.size()];
    return c;
  }

  void validate() const {
    if (num_sensors == 0 || num_sensors > 64) {
      throw ContractViolation("synth: num_sensors must be in [1, 64]");
    }
    if (image_size < 8) throw ContractViolation("synth: image_size must be >= 8");
    if (placement_quality.size() != num_sensors) {
      throw ContractViolation("synth: placement_quality needs one entry per sensor");
    }
    const double total = std::accumulate(class_distribution.begin(),
                                         class_distribution.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
      throw ContractViolation("synth: class_distribution must sum to 1");
    }
    for (double p : class_distribution) {
      if (p < 0.0) throw ContractViolation("synth: negative class probability");
    }
  }
};

namespace detail {

struct Placement {
  double cx, cy, scale;
};

inline bool in_rect(double x, double y, double cx, double cy, double w, double h) {
  return std::abs(x - cx) <= 0.5 * w && std::abs(y - cy) <= 0.5 * h;
}

inline bool in_disc(double x, double y, double cx, double cy, double r) {
  const double dx = x - cx, dy = y - cy;
  return dx * dx + dy * dy <= r * r;
}

// 0 = background, 1 = object body, 2 = dark detail (bus windows).
inline int shape_coverage(ObjectClass cls, double x, double y, const Placement& p) {
  const double s = p.scale;
  switch (cls) {
    case ObjectClass::Car:
      if (in_disc(x, y, p.cx - 5.0 * s, p.cy + 3.0 * s, 2.2 * s) ||
          in_disc(x, y, p.cx + 5.0 * s, p.cy + 3.0 * s, 2.2 * s)) {
        return 1;
      }
      return in_rect(x, y, p.cx, p.cy, 16.0 * s, 6.0 * s) ? 1 : 0;
    case ObjectClass::Bus: {
      if (!in_rect(x, y, p.cx, p.cy, 10.0 * s, 18.0 * s)) return 0;
      // 2 x 4 window grid
      for (int col = 0; col < 2; ++col) {
        for (int row = 0; row < 4; ++row) {
          const double wx = p.cx + (col == 0 ? -2.2 : 2.2) * s;
          const double wy = p.cy + (-6.0 + 4.0 * row) * s;
          if (in_rect(x, y, wx, wy, 2.5 * s, 2.5 * s)) return 2;
        }
      }
      return 1;
    }
    case ObjectClass::Person:
      if (in_disc(x, y, p.cx, p.cy - 6.5 * s, 2.5 * s)) return 1;
      return in_rect(x, y, p.cx, p.cy + 2.0 * s, 3.0 * s, 13.0 * s) ? 1 : 0;
    case ObjectClass::None:
      return 0;
  }
  return 0;
}

// Fixed per-sensor viewpoint: offset of the view centre and base zoom.
inline Placement sensor_viewpoint(std::size_t sensor) {
  static constexpr std::array<double, 6> ox = {-2.0, 1.5, 0.0, 2.5, -1.0, 1.0};
  static constexpr std::array<double, 6> oy = {1.0, -1.5, 0.5, 0.0, -2.0, 2.0};
  static constexpr std::array<double, 6> zoom = {1.0, 0.9, 1.1, 0.95, 0.85, 1.05};
  const std::size_t k = sensor % 6;
  return {ox[k], oy[k], zoom[k]};
}

}  // namespace detail

// Renders a scene with a given label. Consumes `rng` deterministically.
inline Scene render_scene(Rng& rng, std::uint8_t label, const SynthConfig& cfg) {
  cfg.validate();
  if (label >= kNumClasses) throw ContractViolation("synth: label out of range");
  const std::size_t n = cfg.num_sensors;
  const std::size_t side = cfg.image_size;
  const auto cls = static_cast<ObjectClass>(label);

  Scene scene;
  scene.label = label;
  scene.visibility.assign(n, false);

  if (cls != ObjectClass::None) {
    for (std::size_t i = 0; i < n; ++i) {
      scene.visibility[i] = rng.bernoulli(cfg.placement_quality[i]);
    }
    if (scene.visible_count() == 0) {
      // Object scenes are seen by at least one sensor; pick one weighted by
      // placement quality.
      const double total = std::accumulate(cfg.placement_quality.begin(),
                                           cfg.placement_quality.end(), 0.0);
      std::size_t pick = n - 1;
      if (total > 0.0) {
        double u = rng.uniform() * total;
        for (std::size_t i = 0; i < n; ++i) {
          u -= cfg.placement_quality[i];
          if (u < 0.0) {
            pick = i;
            break;
          }
        }
      } else {
        pick = rng.below(n);
      }
      scene.visibility[pick] = true;
    }
  }

  const double wx = rng.uniform(-1.0, 1.0);
  const double wy = rng.uniform(-1.0, 1.0);
  const double intensity = rng.uniform(cfg.intensity_min, cfg.intensity_max);
  const double centre = 0.5 * static_cast<double>(side);
  const double unit = static_cast<double>(side) / 32.0;

  scene.views.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor img({1, side, side});
    for (double& v : img.data()) v = rng.uniform(0.0, cfg.background_amplitude);
    if (scene.visibility[i]) {
      const auto vp = detail::sensor_viewpoint(i);
      const double mirror = (i % 2 == 0) ? 1.0 : -1.0;
      detail::Placement p;
      p.cx = centre + unit * (vp.cx + mirror * cfg.world_spread * wx +
                              rng.uniform(-cfg.view_jitter, cfg.view_jitter));
      p.cy = centre + unit * (vp.cy + cfg.world_spread * wy +
                              rng.uniform(-cfg.view_jitter, cfg.view_jitter));
      p.scale = unit * vp.scale * rng.uniform(cfg.scale_min, cfg.scale_max);
      for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
          const int cov = detail::shape_coverage(
              cls, static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5, p);
          if (cov == 0) continue;
          const double base = cov == 1 ? intensity : 0.35 * intensity;
          img.at(0, r, c) = base + rng.normal(0.0, cfg.pixel_noise);
        }
      }
    }
    // Stored as float32 on disk; keep in-memory values exactly representable.
    for (double& v : img.data()) {
      v = static_cast<double>(static_cast<float>(std::clamp(v, 0.0, 1.0)));
    }
    scene.views.push_back(std::move(img));
  }
  return scene;
}

// Draws a label from the configured class distribution, then renders.
inline Scene generate_scene(Rng& rng, const SynthConfig& cfg) {
  cfg.validate();
  double u = rng.uniform();
  std::uint8_t label = kNumClasses - 1;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    u -= cfg.class_distribution[k];
    if (u < 0.0) {
      label = static_cast<std::uint8_t>(k);
      break;
    }
  }
  return render_scene(rng, label, cfg);
}

struct DatasetSplit {
  std::uint64_t seed = 0;
  std::size_t num_sensors = 6;
  std::size_t image_size = 32;
  std::vector<Scene> train;
  std::vector<Scene> test;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

// Label multiset of `count` samples by largest-remainder quotas on the class
// distribution, shuffled. With a uniform distribution and count == 4 each
// class appears exactly once.
inline std::vector<std::uint8_t> stratified_labels(
    std::size_t count, const std::array<double, kNumClasses>& dist, Rng& rng) {
  std::array<std::size_t, kNumClasses> quota{};
  std::array<double, kNumClasses> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const double exact = dist[k] * static_cast<double>(count);
    quota[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - static_cast<double>(quota[k]);
    assigned += quota[k];
  }
  while (assigned < count) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < kNumClasses; ++k) {
      if (rem[k] > rem[best]) best = k;
    }
    ++quota[best];
    rem[best] = -1.0;
    ++assigned;
  }
  std::vector<std::uint8_t> labels;
  labels.reserve(count);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    labels.insert(labels.end(), quota[k], static_cast<std::uint8_t>(k));
  }
  rng.shuffle(labels.begin(), labels.end());
  return labels;
}

// Deterministic train/test split. Every sample has its own RNG stream
// keyed by (seed, split name, index), so the two splits never share draws.
inline DatasetSplit build_split(std::uint64_t seed, std::size_t train_size,
                                std::size_t test_size,
                                const SynthConfig& cfg = {}) {
  cfg.validate();
  if (train_size == 0 || test_size == 0) {
    throw ContractViolation("build_split: sizes must be positive");
  }
  DatasetSplit split;
  split.seed = seed;
  split.num_sensors = cfg.num_sensors;
  split.image_size = cfg.image_size;
  auto make = [&](std::size_t count, std::string_view name) {
    Rng label_rng(derive_seed(seed, std::string(name) + "/labels"));
    const auto labels = stratified_labels(count, cfg.class_distribution, label_rng);
    std::vector<Scene> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng(derive_seed(seed, name, i));
      out.push_back(render_scene(rng, labels[i], cfg));
    }
    return out;
  };
  split.train = make(train_size, "train");
  split.test = make(test_size, "test");
  return split;
}

inline std::array<std::size_t, kNumClasses> class_histogram(
    const std::vector<Scene>& scenes) {
  std::array<std::size_t, kNumClasses> h{};
  for (const auto& s : scenes) ++h.at(s.label);
  return h;
}

}  // namespace sensordrop
