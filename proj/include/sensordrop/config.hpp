#pragma once

// Experiment configuration: flat key = value text grouped in [sections],
// or the same fields as a JSON object of objects. Every field is listed in
// config_fields(); that table drives parsing, validation and writing for
// both formats. SENSORDROP_SEED and SENSORDROP_OUT override the seed and the
// output directory.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "sensordrop/a2c.hpp"
#include "sensordrop/environment.hpp"
#include "sensordrop/policy.hpp"
#include "sensordrop/scene.hpp"

namespace sensordrop {

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";

  std::size_t train_size = 680;
  std::size_t test_size = 171;
  SynthConfig synth;

  EnvConfig env;
  PretrainConfig pretrain;

  AgentNetConfig agent_net;
  TrainConfig train;
  std::size_t eval_every = 10;  // greedy test evaluation cadence (epochs); 0 = end only
  bool finetune_environment = false;
  double finetune_learning_rate = 1e-4;

  double rho = 0.75;
  std::size_t random_draws = 10;

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && *b == ' ') ++b;
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) {
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + s + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + s + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && item.back() == ' ') item.pop_back();
    out.push_back(parse_double(key, item));
  }
  return out;
}

template <class Range>
std::string format_list(const Range& r) {
  std::string s;
  for (double v : r) {
    if (!s.empty()) s += ',';
    s += format_double(v);
  }
  return s;
}

}  // namespace detail

struct ConfigField {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

inline const std::vector<ConfigField>& config_fields() {
  using C = ExperimentConfig;
  using namespace detail;
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    auto add = [&](std::string sec, std::string key, auto get, auto set) {
      f.push_back({std::move(sec), std::move(key), get, set});
    };
#define SD_UINT(sec, key, member)                                                  \
  add(sec, key, [](const C& c) { return std::to_string(c.member); },               \
      [](C& c, const std::string& v) {                                             \
        c.member = static_cast<decltype(c.member)>(parse_uint(sec "." key, v));    \
      })
#define SD_REAL(sec, key, member)                                                  \
  add(sec, key, [](const C& c) { return format_double(c.member); },                \
      [](C& c, const std::string& v) { c.member = parse_double(sec "." key, v); })
#define SD_BOOL(sec, key, member)                                                  \
  add(sec, key, [](const C& c) { return std::string(c.member ? "true" : "false"); }, \
      [](C& c, const std::string& v) { c.member = parse_bool(sec "." key, v); })

    SD_UINT("experiment", "seed", seed);
    add("experiment", "output_dir", [](const C& c) { return c.output_dir; },
        [](C& c, const std::string& v) { c.output_dir = v; });

    SD_UINT("data", "train_size", train_size);
    SD_UINT("data", "test_size", test_size);
    SD_UINT("data", "num_sensors", synth.num_sensors);
    SD_UINT("data", "image_size", synth.image_size);
    add("data", "class_distribution",
        [](const C& c) { return format_list(c.synth.class_distribution); },
        [](C& c, const std::string& v) {
          const auto l = parse_list("data.class_distribution", v);
          if (l.size() != kNumClasses) {
            throw ConfigError("data.class_distribution: need 4 values");
          }
          std::copy(l.begin(), l.end(), c.synth.class_distribution.begin());
        });
    add("data", "placement_quality",
        [](const C& c) { return format_list(c.synth.placement_quality); },
        [](C& c, const std::string& v) {
          c.synth.placement_quality = parse_list("data.placement_quality", v);
        });
    SD_REAL("data", "background_amplitude", synth.background_amplitude);
    SD_REAL("data", "intensity_min", synth.intensity_min);
    SD_REAL("data", "intensity_max", synth.intensity_max);
    SD_REAL("data", "pixel_noise", synth.pixel_noise);
    SD_REAL("data", "world_spread", synth.world_spread);
    SD_REAL("data", "view_jitter", synth.view_jitter);
    SD_REAL("data", "scale_min", synth.scale_min);
    SD_REAL("data", "scale_max", synth.scale_max);

    SD_UINT("env", "feature_channels", env.feature_channels);
    SD_UINT("env", "kernel", env.kernel);
    SD_BOOL("env", "shared_sensor_weights", env.shared_sensor_weights);
    SD_UINT("env", "cloud_channels_1", env.cloud_channels_1);
    SD_UINT("env", "cloud_channels_2", env.cloud_channels_2);
    SD_UINT("env", "pretrain_epochs", pretrain.epochs);
    SD_UINT("env", "pretrain_batch_size", pretrain.batch_size);
    SD_REAL("env", "pretrain_learning_rate", pretrain.learning_rate);
    SD_UINT("env", "pretrain_patience", pretrain.patience);

    SD_UINT("agent", "channels_1", agent_net.channels_1);
    SD_UINT("agent", "channels_2", agent_net.channels_2);
    SD_UINT("agent", "kernel", agent_net.kernel);
    SD_UINT("agent", "epochs", train.epochs);
    SD_REAL("agent", "alpha", train.alpha);
    SD_REAL("agent", "beta", train.beta);
    SD_REAL("agent", "gamma", train.gamma);
    add("agent", "optimizer", [](const C& c) { return std::string(optimizer_name(c.train.optimizer)); },
        [](C& c, const std::string& v) {
          if (v == "sgd") c.train.optimizer = OptimizerKind::SGD;
          else if (v == "adam") c.train.optimizer = OptimizerKind::Adam;
          else if (v == "rmsprop") c.train.optimizer = OptimizerKind::RMSProp;
          else throw ConfigError("agent.optimizer: expected sgd|adam|rmsprop, got '" + v + "'");
        });
    SD_UINT("agent", "batch_size", train.batch_size);
    SD_BOOL("agent", "shuffle", train.shuffle);
    SD_UINT("agent", "eval_every", eval_every);
    SD_BOOL("agent", "finetune_environment", finetune_environment);
    SD_REAL("agent", "finetune_learning_rate", finetune_learning_rate);

    add("reward", "kind", [](const C& c) { return std::string(reward_kind_name(c.train.reward.kind)); },
        [](C& c, const std::string& v) {
          if (v == "quadratic") c.train.reward.kind = RewardKind::Quadratic;
          else if (v == "harmonic") c.train.reward.kind = RewardKind::Harmonic;
          else throw ConfigError("reward.kind: expected quadratic|harmonic, got '" + v + "'");
        });
    SD_REAL("reward", "k1", train.reward.k1);
    SD_REAL("reward", "k2", train.reward.k2);
    SD_REAL("reward", "zeta", train.reward.zeta);
    SD_REAL("reward", "K", train.reward.K);
    SD_REAL("reward", "zeta_prime", train.reward.zeta_prime);
    SD_REAL("reward", "normalizer", train.reward.normalizer);

    SD_REAL("baseline", "rho", rho);
    SD_UINT("baseline", "random_draws", random_draws);
#undef SD_UINT
#undef SD_REAL
#undef SD_BOOL
    return f;
  }();
  return fields;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  for (const auto& f : config_fields()) {
    if (f.get(a) != f.get(b)) return false;
  }
  return true;
}

// Cross-field checks; throws ConfigError.
inline void validate(const ExperimentConfig& c) {
  if (c.train_size == 0 || c.test_size == 0) throw ConfigError("data: sizes must be positive");
  if (c.synth.placement_quality.size() != c.synth.num_sensors) {
    throw ConfigError("data.placement_quality: need one value per sensor (" +
                      std::to_string(c.synth.num_sensors) + ")");
  }
  if (c.synth.image_size % 8 != 0) throw ConfigError("data.image_size must be a multiple of 8");
  try {
    c.synth.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  if (c.env.kernel % 2 == 0 || c.agent_net.kernel % 2 == 0) {
    throw ConfigError("kernel sizes must be odd");
  }
  if (c.pretrain.batch_size == 0 || c.train.batch_size == 0) {
    throw ConfigError("batch sizes must be positive");
  }
  if (c.rho < 0.0 || c.rho > 1.0) throw ConfigError("baseline.rho must lie in [0, 1]");
  if (c.train.gamma < 0.0 || c.train.gamma > 1.0) throw ConfigError("agent.gamma must lie in [0, 1]");
  if (c.train.alpha < 0.0 || c.train.beta < 0.0) throw ConfigError("learning rates must be >= 0");
  c.train.reward.validate();
}

// Seeds of the individual stages follow the experiment seed.
inline void sync_seeds(ExperimentConfig& c) {
  c.pretrain.seed = c.seed;
  c.train.seed = c.seed;
}

inline void set_field(ExperimentConfig& c, const std::string& section, const std::string& key,
                      const std::string& value) {
  for (const auto& f : config_fields()) {
    if (f.section == section && f.key == key) {
      f.set(c, value);
      return;
    }
  }
  throw ConfigError("unknown config key " + section + "." + key);
}

inline void apply_env_overrides(ExperimentConfig& c) {
  if (const char* s = std::getenv("SENSORDROP_SEED"); s && *s) {
    c.seed = detail::parse_uint("SENSORDROP_SEED", s);
  }
  if (const char* s = std::getenv("SENSORDROP_OUT"); s && *s) c.output_dir = s;
  sync_seeds(c);
}

inline ExperimentConfig parse_ini(std::istream& is) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' outside a [section]");
    for (const auto& [key, value] : body) set_field(c, section, key, value.data());
  }
  sync_seeds(c);
  validate(c);
  return c;
}

inline void write_ini(std::ostream& os, const ExperimentConfig& c) {
  std::string section;
  for (const auto& f : config_fields()) {
    if (f.section != section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << f.key << " = " << f.get(c) << '\n';
  }
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& f : config_fields()) j[f.section][f.key] = f.get(c);
  return j;
}

// Accepts values as strings (what to_json writes) or as JSON numbers/bools.
inline ExperimentConfig from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: JSON root must be an object");
  ExperimentConfig c;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      std::string text;
      if (value.is_string()) {
        text = value.get<std::string>();
      } else if (value.is_boolean()) {
        text = value.get<bool>() ? "true" : "false";
      } else if (value.is_number_unsigned()) {
        text = std::to_string(value.get<std::uint64_t>());
      } else if (value.is_number()) {
        text = detail::format_double(value.get<double>());
      } else if (value.is_array()) {
        for (const auto& x : value) {
          if (!text.empty()) text += ',';
          text += detail::format_double(x.get<double>());
        }
      } else {
        throw ConfigError("config: unsupported value for " + section + "." + key);
      }
      set_field(c, section, key, text);
    }
  }
  sync_seeds(c);
  validate(c);
  return c;
}

// Loads .json files as JSON, anything else as INI text. A JSON run summary
// is accepted too: its "config" member is used.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + path.string() + ": " + e.what());
    }
    if (j.contains("config") && j["config"].is_object()) return from_json(j["config"]);
    return from_json(j);
  }
  return parse_ini(is);
}

inline void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_ini(os, c);
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace sensordrop
