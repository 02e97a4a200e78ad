#pragma once

// End-to-end experiment pipeline and comparison baselines.
//
// A run directory produced by run_sensordrop contains:
//   config.ini                      the exact configuration
//   MANIFEST                        one line per finished stage, "complete" last
//   dataset.sdds                    only when the run generated its own data
//   env/                            pretrained sensor + cloud checkpoints
//   agent/actor.sdnn, critic.sdnn   trained agent
//   *.csv, summary.json, plot.py    see report.hpp

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sensordrop/a2c.hpp"
#include "sensordrop/checkpoint.hpp"
#include "sensordrop/config.hpp"
#include "sensordrop/dataset_io.hpp"
#include "sensordrop/environment.hpp"
#include "sensordrop/report.hpp"

namespace sensordrop {

inline ExperimentRecord to_record(const PolicyEvaluation& ev, std::size_t epoch = 0) {
  return {epoch, ev.mean_reward_raw, ev.mean_reward_normalized, ev.accuracy, ev.comm_overhead};
}

inline MethodResult to_method(std::string name, const ExperimentRecord& r) {
  return {std::move(name), r.accuracy, r.comm_overhead, r.mean_reward_raw,
          r.mean_reward_normalized};
}

// ---------------------------------------------------------------------------
// Baselines

// Every sensor transmits for every scene.
template <class Env>
PolicyEvaluation run_baseline(Env& test, const RewardConfig& reward_cfg) {
  const std::size_t n = test.num_sensors();
  return evaluate_masks(test, reward_cfg, [n](std::size_t) { return ActionMask::all_ones(n); });
}

inline PolicyEvaluation run_baseline(const DatasetSplit& split, const Environment& env,
                                     const RewardConfig& reward_cfg) {
  FrozenEnvironment test(env, split.test);
  return run_baseline(test, reward_cfg);
}

// Each sensor independently transmits with probability rho, per scene.
template <class Env>
PolicyEvaluation run_random_drop(Env& test, double rho, Rng& rng, const RewardConfig& reward_cfg) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("random drop: rho must be in [0, 1]");
  const std::size_t n = test.num_sensors();
  return evaluate_masks(test, reward_cfg, [&](std::size_t) {
    ActionMask m = ActionMask::all_zeros(n);
    for (std::size_t k = 0; k < n; ++k) m.set(k, rng.bernoulli(rho));
    return m;
  });
}

inline PolicyEvaluation run_random_drop(const DatasetSplit& split, const Environment& env,
                                        double rho, Rng& rng, const RewardConfig& reward_cfg) {
  FrozenEnvironment test(env, split.test);
  return run_random_drop(test, rho, rng, reward_cfg);
}

struct RandomDropSummary {
  double rho = 0.0;
  std::vector<ExperimentRecord> draws;
  ExperimentRecord mean;
};

// Averages `draws` independent RandomDrop evaluations; draw j uses the
// stream derive_seed(seed, "random-drop", j).
template <class Env>
RandomDropSummary run_random_drop_mean(Env& test, double rho, std::size_t draws,
                                       std::uint64_t seed, const RewardConfig& reward_cfg) {
  if (draws == 0) throw ConfigError("random drop: need at least one draw");
  RandomDropSummary s;
  s.rho = rho;
  for (std::size_t j = 0; j < draws; ++j) {
    Rng rng(derive_seed(seed, "random-drop", j));
    s.draws.push_back(to_record(run_random_drop(test, rho, rng, reward_cfg)));
  }
  const double inv = 1.0 / static_cast<double>(draws);
  for (const auto& r : s.draws) {
    s.mean.accuracy += r.accuracy * inv;
    s.mean.comm_overhead += r.comm_overhead * inv;
    s.mean.mean_reward_raw += r.mean_reward_raw * inv;
    s.mean.mean_reward_normalized += r.mean_reward_normalized * inv;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Stage helpers

inline DatasetSplit prepare_dataset(const ExperimentConfig& cfg) {
  return build_split(cfg.seed, cfg.train_size, cfg.test_size, cfg.synth);
}

inline Environment init_environment(const ExperimentConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "env-init"));
  return make_environment(cfg.synth.num_sensors, cfg.synth.image_size, cfg.env, rng);
}

// Sensor checkpoints are sensor.sdnn when weights are shared, otherwise
// sensor_<i>.sdnn for each sensor; the cloud is cloud.sdnn.
inline void save_environment(const std::filesystem::path& dir, const Environment& env) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  if (env.sensors.shared) {
    save_network(dir / "sensor.sdnn", env.sensors.nets.at(0));
  } else {
    for (std::size_t i = 0; i < env.sensors.nets.size(); ++i) {
      save_network(dir / ("sensor_" + std::to_string(i) + ".sdnn"), env.sensors.nets[i]);
    }
  }
  save_network(dir / "cloud.sdnn", env.cloud.net);
}

inline Environment load_environment(const std::filesystem::path& dir, std::size_t num_sensors) {
  Environment env;
  env.sensors.num_sensors = num_sensors;
  if (std::filesystem::exists(dir / "sensor.sdnn")) {
    env.sensors.shared = true;
    env.sensors.nets.push_back(load_network(dir / "sensor.sdnn"));
  } else {
    env.sensors.shared = false;
    for (std::size_t i = 0; i < num_sensors; ++i) {
      env.sensors.nets.push_back(load_network(dir / ("sensor_" + std::to_string(i) + ".sdnn")));
    }
    if (std::filesystem::exists(dir / ("sensor_" + std::to_string(num_sensors) + ".sdnn"))) {
      throw FormatError(dir.string() + ": holds more than " + std::to_string(num_sensors) +
                        " sensor checkpoints");
    }
  }
  env.cloud.net = load_network(dir / "cloud.sdnn");
  const Shape feat = env.sensors.nets[0].output_shape();
  for (const auto& net : env.sensors.nets) {
    if (net.output_shape() != feat || net.input_shape().size() != 3 ||
        net.input_shape()[0] != 1) {
      throw FormatError(dir.string() + ": sensor checkpoints disagree on shapes");
    }
  }
  if (env.cloud.net.input_shape() != feat || env.cloud.net.output_shape() != Shape{kNumClasses}) {
    throw FormatError(dir.string() + ": cloud checkpoint does not match sensor features");
  }
  return env;
}

inline void save_agent(const std::filesystem::path& dir, const A2CAgent& agent) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_network(dir / "actor.sdnn", agent.actor().net);
  save_network(dir / "critic.sdnn", agent.critic().net);
}

inline ActorNet load_actor(const std::filesystem::path& dir) {
  return ActorNet{load_network(dir / "actor.sdnn")};
}

// State tensor shape the agent sees: one channel-mean map per sensor.
inline Shape state_shape(const Environment& env) {
  const Shape& f = env.feature_shape();
  return {env.num_sensors(), f[1], f[2]};
}

struct AgentTraining {
  A2CAgent agent;
  std::vector<ExperimentRecord> history;
  std::vector<EvalPoint> eval_history;
  std::optional<Environment> finetuned;  // set when the environment kept training
};

// Trains a fresh agent against `env` on the training scenes. When
// cfg.eval_every > 0 the greedy policy is scored on the test scenes every
// that many epochs.
inline AgentTraining train_agent(const ExperimentConfig& cfg, const Environment& env,
                                 const DatasetSplit& split, const TrainHooks& extra = {}) {
  Rng init_rng(derive_seed(cfg.seed, "agent-init"));
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  AgentTraining out{A2CAgent::create(state_shape(env), cfg.agent_net, tc, init_rng), {}, {}, {}};

  auto with_eval = [&](auto make_test_env) {
    TrainHooks hooks = extra;
    hooks.on_epoch = [&](const ExperimentRecord& r) {
      if (extra.on_epoch) extra.on_epoch(r);
      if (cfg.eval_every > 0 && r.epoch % cfg.eval_every == 0) {
        auto test = make_test_env();
        const auto ev = evaluate_greedy(out.agent.actor(), test, tc.reward);
        out.eval_history.push_back({r.epoch, ev.accuracy, ev.comm_overhead});
      }
    };
    return hooks;
  };

  if (!cfg.finetune_environment) {
    FrozenEnvironment train_env(env, split.train);
    std::optional<FrozenEnvironment> test_env;
    auto hooks = with_eval([&]() -> FrozenEnvironment& {
      if (!test_env) test_env.emplace(env, split.test);
      return *test_env;
    });
    out.history = train(out.agent, train_env, tc, hooks);
  } else {
    Environment live = env;
    AdaptiveEnvironment train_env(live, split.train, cfg.finetune_learning_rate);
    auto hooks = with_eval([&]() { return FrozenEnvironment(live, split.test); });
    out.history = train(out.agent, train_env, tc, hooks);
    out.finetuned = std::move(live);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full pipeline

// Appends finished stage names to <dir>/MANIFEST, flushing each line so an
// interrupted run shows how far it got.
class Manifest {
 public:
  explicit Manifest(const std::filesystem::path& path) : path_(path) {
    std::ofstream os(path_, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path_.string() + " for writing");
  }
  void mark(const std::string& stage) {
    std::ofstream os(path_, std::ios::app);
    os << stage << '\n';
    if (!os) throw IoError("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
};

// Read back a MANIFEST; an absent file reads as no stages.
inline std::vector<std::string> read_manifest(const std::filesystem::path& dir) {
  std::vector<std::string> stages;
  std::ifstream is(dir / "MANIFEST");
  for (std::string line; std::getline(is, line);) {
    if (!line.empty()) stages.push_back(line);
  }
  return stages;
}

// Optional precomputed inputs; anything missing is produced by the run.
struct PipelineInputs {
  const DatasetSplit* split = nullptr;
  const Environment* environment = nullptr;
  const PretrainHistory* pretrain_history = nullptr;
};

struct SensorDropRun {
  PretrainHistory pretrain;
  std::vector<ExperimentRecord> train_history;
  std::vector<EvalPoint> eval_history;
  PolicyEvaluation baseline;
  RandomDropSummary random_rho;
  RandomDropSummary random_matched;
  PolicyEvaluation sensordrop;
  ContributionReport contribution;
  std::vector<std::string> files;
};

inline std::string rho_label(double rho) { return "RandomDrop rho=" + detail::format_double(rho); }

inline SensorDropRun run_sensordrop(const ExperimentConfig& config, const PipelineInputs& in = {}) {
  ExperimentConfig cfg = config;
  sync_seeds(cfg);
  validate(cfg);
  const std::filesystem::path dir = cfg.output_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  Manifest manifest(dir / "MANIFEST");
  save_config(dir / "config.ini", cfg);
  manifest.mark("config");

  SensorDropRun run;
  std::optional<DatasetSplit> own_split;
  if (!in.split) {
    own_split = prepare_dataset(cfg);
    save_split(dir / "dataset.sdds", *own_split);
  }
  const DatasetSplit& split = in.split ? *in.split : *own_split;
  if (split.num_sensors != cfg.synth.num_sensors) {
    throw ConfigError("dataset has " + std::to_string(split.num_sensors) +
                      " sensors but config expects " + std::to_string(cfg.synth.num_sensors));
  }
  manifest.mark("dataset");

  std::optional<Environment> own_env;
  if (!in.environment) {
    own_env = init_environment(cfg);
    run.pretrain = pretrain(*own_env, split, cfg.pretrain);
    save_environment(dir / "env", *own_env);
  } else if (in.pretrain_history) {
    run.pretrain = *in.pretrain_history;
  }
  const Environment& pretrained = in.environment ? *in.environment : *own_env;
  manifest.mark("pretrain");

  AgentTraining trained = train_agent(cfg, pretrained, split);
  run.train_history = std::move(trained.history);
  run.eval_history = std::move(trained.eval_history);
  save_agent(dir / "agent", trained.agent);
  if (trained.finetuned) save_environment(dir / "env_finetuned", *trained.finetuned);
  manifest.mark("agent");

  const Environment& eval_env = trained.finetuned ? *trained.finetuned : pretrained;
  FrozenEnvironment test(eval_env, split.test);
  const RewardConfig& rc = cfg.train.reward;
  const std::size_t n = test.num_sensors();
  run.baseline = run_baseline(test, rc);
  run.sensordrop = evaluate_greedy(trained.agent.actor(), test, rc);
  run.random_rho = run_random_drop_mean(test, cfg.rho, cfg.random_draws, cfg.seed, rc);
  run.random_matched = run_random_drop_mean(test, run.sensordrop.comm_overhead, cfg.random_draws,
                                            derive_seed(cfg.seed, "matched"), rc);
  run.contribution = contribution(run.sensordrop.decisions, n);
  manifest.mark("evaluation");

  Report report;
  report.config = cfg;
  report.methods = {
      to_method("Baseline", to_record(run.baseline)),
      to_method(rho_label(cfg.rho), run.random_rho.mean),
      to_method(rho_label(run.sensordrop.comm_overhead) + " (matched)", run.random_matched.mean),
      to_method(std::string("SensorDrop ") + reward_kind_name(rc.kind),
                to_record(run.sensordrop)),
  };
  report.pretrain = run.pretrain.epochs;
  report.train_history = run.train_history;
  report.eval_history = run.eval_history;
  report.test_decisions = run.sensordrop.decisions;
  report.contribution = run.contribution;
  run.files = emit_report(dir, report);
  manifest.mark("report");
  manifest.mark("complete");
  return run;
}

// ---------------------------------------------------------------------------
// K sweep: one SensorDrop run per K under the harmonic reward, each in
// <output_dir>/K_<value>. A failing run is recorded and the sweep continues.

inline std::vector<KSweepRow> run_k_sweep(const ExperimentConfig& config,
                                          const std::vector<double>& Ks,
                                          const PipelineInputs& in = {}) {
  std::vector<KSweepRow> rows;
  if (Ks.empty()) return rows;
  ExperimentConfig base = config;
  base.train.reward.kind = RewardKind::Harmonic;
  sync_seeds(base);
  validate(base);

  // Share one dataset and pretrained environment across all K values.
  std::optional<DatasetSplit> own_split;
  std::optional<Environment> own_env;
  std::optional<PretrainHistory> own_hist;
  PipelineInputs shared = in;
  if (!shared.split) {
    own_split = prepare_dataset(base);
    shared.split = &*own_split;
  }
  if (!shared.environment) {
    own_env = init_environment(base);
    own_hist = pretrain(*own_env, *shared.split, base.pretrain);
    shared.environment = &*own_env;
    shared.pretrain_history = &*own_hist;
  }

  for (double K : Ks) {
    KSweepRow row;
    row.K = K;
    try {
      ExperimentConfig c = base;
      c.train.reward.K = K;
      c.output_dir = (std::filesystem::path(base.output_dir) / ("K_" + detail::format_double(K))).string();
      const auto r = run_sensordrop(c, shared);
      row.ok = true;
      row.accuracy = r.sensordrop.accuracy;
      row.comm_overhead = r.sensordrop.comm_overhead;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(row);
  }

  Report report;
  report.config = base;
  report.k_sweep = rows;
  emit_report(base.output_dir, report);
  return rows;
}

}  // namespace sensordrop
