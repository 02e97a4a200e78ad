// sensordrop command-line driver.
//
// Exit codes: 0 success, 2 configuration error, 3 training divergence,
// 4 I/O or file-format error, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sensordrop.hpp"

namespace fs = std::filesystem;
using namespace sensordrop;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;  // section.key=value
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "INI or JSON config file");
  app->add_option("--set", c.overrides, "override a config field, e.g. agent.epochs=200");
  app->add_option("--seed", c.seed, "experiment seed");
  app->add_option("-o,--out", c.out, "output directory");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  apply_env_overrides(cfg);
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ConfigError("--set expects section.key=value, got '" + o + "'");
    }
    set_field(cfg, o.substr(0, dot), o.substr(dot + 1, eq - dot - 1), o.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  sync_seeds(cfg);
  validate(cfg);
  return cfg;
}

fs::path ensure_dir(const std::string& d) {
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw IoError("cannot create " + d + ": " + ec.message());
  return d;
}

DatasetSplit load_or_build(const std::string& data, const ExperimentConfig& cfg) {
  if (!data.empty()) return load_split(data, cfg.synth.num_sensors);
  return prepare_dataset(cfg);
}

void print_record(const std::string& name, const ExperimentRecord& r) {
  std::cout << "method,accuracy,comm_overhead,mean_reward_raw,mean_reward_normalized\n"
            << name << ',' << detail::format_double(r.accuracy) << ','
            << detail::format_double(r.comm_overhead) << ','
            << detail::format_double(r.mean_reward_raw) << ','
            << detail::format_double(r.mean_reward_normalized) << '\n';
}

void print_run(const SensorDropRun& r, const fs::path& dir) {
  std::printf("%-34s %9s %9s\n", "method", "accuracy", "overhead");
  auto line = [](const std::string& name, double acc, double ovh) {
    std::printf("%-34s %8.1f%% %8.1f%%\n", name.c_str(), 100 * acc, 100 * ovh);
  };
  line("Baseline", r.baseline.accuracy, r.baseline.comm_overhead);
  line(rho_label(r.random_rho.rho), r.random_rho.mean.accuracy, r.random_rho.mean.comm_overhead);
  line(rho_label(r.random_matched.rho) + " (matched)", r.random_matched.mean.accuracy,
       r.random_matched.mean.comm_overhead);
  line("SensorDrop", r.sensordrop.accuracy, r.sensordrop.comm_overhead);
  std::cout << "outputs in " << dir.string() << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"SensorDrop: learned sensor dropping for multi-view classification"};
  app.require_subcommand(1);

  // dataset
  auto* dataset = app.add_subcommand("dataset", "synthetic dataset tools");
  dataset->require_subcommand(1);
  Common gen_opts;
  auto* gen = dataset->add_subcommand("generate", "generate the train/test split");
  add_common(gen, gen_opts);
  std::string inspect_path;
  auto* inspect = dataset->add_subcommand("inspect", "print a dataset file summary");
  inspect->add_option("path", inspect_path, "dataset file")->required();

  // env
  auto* env_cmd = app.add_subcommand("env", "sensor and cloud networks");
  env_cmd->require_subcommand(1);
  Common pre_opts;
  std::string pre_data;
  auto* pre = env_cmd->add_subcommand("pretrain", "pretrain sensors + cloud with all sensors on");
  add_common(pre, pre_opts);
  pre->add_option("--data", pre_data, "dataset file (generated from the config if omitted)");

  // agent
  auto* agent_cmd = app.add_subcommand("agent", "actor-critic agent");
  agent_cmd->require_subcommand(1);
  Common tr_opts;
  std::string tr_data, tr_env;
  auto* tr = agent_cmd->add_subcommand("train", "train the agent against a pretrained environment");
  add_common(tr, tr_opts);
  tr->add_option("--data", tr_data, "dataset file");
  tr->add_option("--env", tr_env, "pretrained environment directory")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a method on the test scenes");
  Common ev_opts;
  std::string ev_method, ev_data, ev_env, ev_agent;
  double ev_rho = -1.0;
  add_common(eval_cmd, ev_opts);
  eval_cmd->add_option("method", ev_method, "baseline | random | sensordrop")
      ->required()
      ->check(CLI::IsMember({"baseline", "random", "sensordrop"}));
  eval_cmd->add_option("--data", ev_data, "dataset file");
  eval_cmd->add_option("--env", ev_env, "pretrained environment directory")->required();
  eval_cmd->add_option("--agent", ev_agent, "agent directory (sensordrop)");
  eval_cmd->add_option("--rho", ev_rho, "transmit probability (random)");

  // run
  Common run_opts;
  auto* run_cmd = app.add_subcommand("run", "full pipeline: data, pretrain, agent, evaluation, report");
  add_common(run_cmd, run_opts);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweeps");
  sweep_cmd->require_subcommand(1);
  Common sw_opts;
  std::vector<double> sw_K;
  bool sw_empty = false;
  auto* sweep_k = sweep_cmd->add_subcommand("k", "harmonic-reward K trade-off sweep");
  add_common(sweep_k, sw_opts);
  sweep_k->add_option("-K,--K", sw_K, "K values")->delimiter(',');
  sweep_k->add_flag("--none", sw_empty, "run an empty sweep");

  // report
  std::string rep_dir, rep_data;
  auto* rep = app.add_subcommand("report", "re-evaluate a finished run directory and rewrite its report");
  rep->add_option("run_dir", rep_dir, "run directory")->required();
  rep->add_option("--data", rep_data, "dataset file (default: <run_dir>/dataset.sdds)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    const auto cfg = resolve(gen_opts);
    const auto dir = ensure_dir(cfg.output_dir);
    const auto split = prepare_dataset(cfg);
    save_split(dir / "dataset.sdds", split);
    save_config(dir / "config.ini", cfg);
    std::cout << "wrote " << (dir / "dataset.sdds").string() << " (" << split.train.size()
              << " train, " << split.test.size() << " test)\n";
    return 0;
  }

  if (inspect->parsed()) {
    const auto split = load_split(inspect_path);
    std::cout << "sensors " << split.num_sensors << ", image " << split.image_size << "x"
              << split.image_size << ", seed " << split.seed << '\n';
    for (const auto* part : {&split.train, &split.test}) {
      const auto h = class_histogram(*part);
      std::size_t objects = 0, visible = 0;
      for (const auto& s : *part) {
        if (s.label != static_cast<std::uint8_t>(ObjectClass::None)) {
          ++objects;
          visible += s.visible_count();
        }
      }
      std::cout << (part == &split.train ? "train" : "test ") << ' ' << part->size() << ':';
      for (std::size_t c = 0; c < kNumClasses; ++c) std::cout << ' ' << class_name(c) << '=' << h[c];
      if (objects > 0) {
        std::printf("  mean visible views %.2f", static_cast<double>(visible) / objects);
      }
      std::cout << '\n';
    }
    return 0;
  }

  if (pre->parsed()) {
    const auto cfg = resolve(pre_opts);
    const auto dir = ensure_dir(cfg.output_dir);
    const auto split = load_or_build(pre_data, cfg);
    Environment env = init_environment(cfg);
    const auto hist = pretrain(env, split, cfg.pretrain);
    save_environment(dir / "env", env);
    save_config(dir / "config.ini", cfg);
    write_pretrain_csv(dir / "pretrain_history.csv", hist.epochs);
    std::printf("pretrained %zu epochs, test accuracy %.3f\n", hist.epochs.size(),
                hist.final_test_acc());
    return 0;
  }

  if (tr->parsed()) {
    const auto cfg = resolve(tr_opts);
    const auto dir = ensure_dir(cfg.output_dir);
    const auto split = load_or_build(tr_data, cfg);
    const Environment env = load_environment(tr_env, cfg.synth.num_sensors);
    const auto trained = train_agent(cfg, env, split);
    save_agent(dir / "agent", trained.agent);
    save_config(dir / "config.ini", cfg);
    write_history_csv(dir / "train_history.csv", trained.history);
    if (!trained.eval_history.empty()) write_eval_history_csv(dir / "eval_history.csv", trained.eval_history);
    const auto& last = trained.history.back();
    std::printf("trained %zu epochs, final train accuracy %.3f, overhead %.3f\n",
                trained.history.size(), last.accuracy, last.comm_overhead);
    return 0;
  }

  if (eval_cmd->parsed()) {
    const auto cfg = resolve(ev_opts);
    const auto split = load_or_build(ev_data, cfg);
    const Environment env = load_environment(ev_env, cfg.synth.num_sensors);
    FrozenEnvironment test(env, split.test);
    const auto& rc = cfg.train.reward;
    if (ev_method == "baseline") {
      print_record("Baseline", to_record(run_baseline(test, rc)));
    } else if (ev_method == "random") {
      const double rho = ev_rho >= 0.0 ? ev_rho : cfg.rho;
      const auto s = run_random_drop_mean(test, rho, cfg.random_draws, cfg.seed, rc);
      print_record(rho_label(rho), s.mean);
    } else {
      if (ev_agent.empty()) throw ConfigError("eval sensordrop needs --agent");
      const ActorNet actor = load_actor(ev_agent);
      print_record("SensorDrop", to_record(evaluate_greedy(actor, test, rc)));
    }
    return 0;
  }

  if (run_cmd->parsed()) {
    const auto cfg = resolve(run_opts);
    const auto r = run_sensordrop(cfg);
    print_run(r, cfg.output_dir);
    return 0;
  }

  if (sweep_k->parsed()) {
    const auto cfg = resolve(sw_opts);
    std::vector<double> Ks = sw_K;
    if (Ks.empty() && !sw_empty) Ks = {0.1, 0.5, 0.9};
    const auto rows = run_k_sweep(cfg, Ks);
    std::cout << "K,status,accuracy,comm_overhead\n";
    for (const auto& row : rows) {
      std::cout << detail::format_double(row.K) << ',' << (row.ok ? "ok" : "failed") << ','
                << detail::format_double(row.accuracy) << ','
                << detail::format_double(row.comm_overhead);
      if (!row.ok) std::cout << "  # " << row.error;
      std::cout << '\n';
    }
    return 0;
  }

  if (rep->parsed()) {
    const fs::path dir = rep_dir;
    auto cfg = load_config(dir / "config.ini");
    cfg.output_dir = dir.string();
    const auto split = load_split(rep_data.empty() ? dir / "dataset.sdds" : fs::path(rep_data),
                                  cfg.synth.num_sensors);
    const Environment env = load_environment(
        fs::exists(dir / "env_finetuned") ? dir / "env_finetuned" : dir / "env",
        cfg.synth.num_sensors);
    const ActorNet actor = load_actor(dir / "agent");
    FrozenEnvironment test(env, split.test);
    const auto& rc = cfg.train.reward;
    SensorDropRun r;
    r.baseline = run_baseline(test, rc);
    r.sensordrop = evaluate_greedy(actor, test, rc);
    r.random_rho = run_random_drop_mean(test, cfg.rho, cfg.random_draws, cfg.seed, rc);
    r.random_matched = run_random_drop_mean(test, r.sensordrop.comm_overhead, cfg.random_draws,
                                            derive_seed(cfg.seed, "matched"), rc);
    Report report;
    report.config = cfg;
    report.methods = {
        to_method("Baseline", to_record(r.baseline)),
        to_method(rho_label(cfg.rho), r.random_rho.mean),
        to_method(rho_label(r.sensordrop.comm_overhead) + " (matched)", r.random_matched.mean),
        to_method(std::string("SensorDrop ") + reward_kind_name(rc.kind), to_record(r.sensordrop)),
    };
    report.test_decisions = r.sensordrop.decisions;
    report.contribution = contribution(r.sensordrop.decisions, test.num_sensors());
    emit_report(dir, report);
    print_run(r, dir);
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const FormatError& e) {
    std::cerr << "file format error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
