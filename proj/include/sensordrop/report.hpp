#pragma once

// Run-directory outputs: CSV tables, JSON summary, plot script.
// All numbers are written in shortest round-trip form so identical inputs
// give identical bytes.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sensordrop/a2c.hpp"
#include "sensordrop/config.hpp"

namespace sensordrop {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kVersionString = "sensordrop 1.0.0";

// One row of the method comparison table.
struct MethodResult {
  std::string method;
  double accuracy = 0.0;
  double comm_overhead = 0.0;  // fraction of the all-send traffic
  double mean_reward_raw = 0.0;
  double mean_reward_normalized = 0.0;
};

struct EvalPoint {
  std::size_t epoch = 0;
  double accuracy = 0.0;
  double comm_overhead = 0.0;
};

// Fraction of test scenes in which each sensor transmitted.
struct ContributionReport {
  std::vector<double> transmit_fraction;

  double mean() const {
    if (transmit_fraction.empty()) return 0.0;
    double s = 0.0;
    for (double v : transmit_fraction) s += v;
    return s / static_cast<double>(transmit_fraction.size());
  }
};

inline ContributionReport contribution(const std::vector<Decision>& decisions, std::size_t n) {
  ContributionReport r;
  r.transmit_fraction.assign(n, 0.0);
  if (decisions.empty()) return r;
  std::vector<std::size_t> count(n, 0);
  for (const auto& d : decisions) {
    for (std::size_t i = 0; i < n; ++i) count[i] += d.mask[i] ? 1 : 0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    r.transmit_fraction[i] =
        static_cast<double>(count[i]) / static_cast<double>(decisions.size());
  }
  return r;
}

struct KSweepRow {
  double K = 0.0;
  bool ok = false;
  double accuracy = 0.0;
  double comm_overhead = 0.0;
  std::string error;
};

// Everything a run may report; empty members are simply not written.
struct Report {
  ExperimentConfig config;
  std::vector<MethodResult> methods;
  std::vector<PretrainEpoch> pretrain;
  std::vector<ExperimentRecord> train_history;
  std::vector<EvalPoint> eval_history;
  std::vector<Decision> test_decisions;
  std::optional<ContributionReport> contribution;
  std::vector<KSweepRow> k_sweep;
};

namespace detail {

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& header) : path_(path), os_(path) {
    if (!os_) throw IoError("cannot open " + path.string() + " for writing");
    os_ << header << '\n';
  }
  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
    os_ << '\n';
  }
  ~CsvFile() = default;
  void close() {
    os_.close();
    if (!os_) throw IoError("write failed: " + path_.string());
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  std::filesystem::path path_;
  std::ofstream os_;
};

}  // namespace detail

inline void write_pretrain_csv(const std::filesystem::path& path,
                               const std::vector<PretrainEpoch>& h) {
  detail::CsvFile f(path, "epoch,train_loss,train_acc,test_acc");
  for (const auto& e : h) f.row(e.epoch, e.train_loss, e.train_acc, e.test_acc);
  f.close();
}

inline void write_history_csv(const std::filesystem::path& path,
                              const std::vector<ExperimentRecord>& h) {
  detail::CsvFile f(path,
                    "epoch,mean_reward_raw,mean_reward_normalized,train_accuracy,"
                    "comm_overhead_fraction");
  for (const auto& r : h) {
    f.row(r.epoch, r.mean_reward_raw, r.mean_reward_normalized, r.accuracy, r.comm_overhead);
  }
  f.close();
}

inline void write_eval_history_csv(const std::filesystem::path& path,
                                   const std::vector<EvalPoint>& h) {
  detail::CsvFile f(path, "epoch,test_accuracy,test_comm_overhead");
  for (const auto& p : h) f.row(p.epoch, p.accuracy, p.comm_overhead);
  f.close();
}

inline void write_decisions_csv(const std::filesystem::path& path,
                                const std::vector<Decision>& ds) {
  detail::CsvFile f(path, "scene,label,mask,d_active,predicted,correct");
  for (const auto& d : ds) {
    f.row(d.scene, static_cast<int>(d.label), d.mask.to_string(), d.outcome.d_active,
          d.outcome.predicted, d.outcome.correct ? 1 : 0);
  }
  f.close();
}

inline void write_contribution_csv(const std::filesystem::path& path,
                                   const ContributionReport& c) {
  detail::CsvFile f(path, "sensor,transmit_fraction");
  for (std::size_t i = 0; i < c.transmit_fraction.size(); ++i) f.row(i, c.transmit_fraction[i]);
  f.close();
}

inline void write_methods_csv(const std::filesystem::path& path,
                              const std::vector<MethodResult>& ms) {
  detail::CsvFile f(path,
                    "method,accuracy,comm_overhead,mean_reward_raw,mean_reward_normalized");
  for (const auto& m : ms) {
    f.row(m.method, m.accuracy, m.comm_overhead, m.mean_reward_raw, m.mean_reward_normalized);
  }
  f.close();
}

inline void write_k_sweep_csv(const std::filesystem::path& path, const std::vector<KSweepRow>& rows) {
  detail::CsvFile f(path, "K,status,accuracy,comm_overhead");
  for (const auto& r : rows) f.row(r.K, std::string(r.ok ? "ok" : "failed"), r.accuracy, r.comm_overhead);
  f.close();
}

// Matplotlib script over whichever CSVs were written next to it.
inline std::string plot_script(const std::vector<std::string>& files) {
  auto has = [&](const std::string& f) {
    return std::find(files.begin(), files.end(), f) != files.end();
  };
  std::string s =
      "#!/usr/bin/env python3\n"
      "# Generated by " + std::string(kVersionString) + ". Run from this directory.\n"
      "import csv\n"
      "import matplotlib\n"
      "matplotlib.use('Agg')\n"
      "import matplotlib.pyplot as plt\n\n"
      "def load(name):\n"
      "    with open(name, newline='') as f:\n"
      "        return list(csv.DictReader(f))\n\n"
      "def col(rows, key):\n"
      "    return [float(r[key]) for r in rows]\n\n";
  if (has("train_history.csv")) {
    s +=
        "h = load('train_history.csv')\n"
        "ep = col(h, 'epoch')\n"
        "fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))\n"
        "top.plot(ep, col(h, 'train_accuracy'), label='accuracy')\n"
        "top.plot(ep, col(h, 'mean_reward_normalized'), label='reward (normalized)')\n"
        "top.legend(); top.set_ylabel('value')\n"
        "bottom.plot(ep, col(h, 'train_accuracy'), label='accuracy')\n"
        "bottom.plot(ep, col(h, 'comm_overhead_fraction'), label='communication overhead')\n"
        "bottom.legend(); bottom.set_xlabel('epoch'); bottom.set_ylabel('fraction')\n"
        "fig.tight_layout(); fig.savefig('convergence.png', dpi=120)\n\n"
        "fig, ax = plt.subplots(figsize=(6, 5))\n"
        "sc = ax.scatter(col(h, 'comm_overhead_fraction'), col(h, 'train_accuracy'), c=ep, cmap='coolwarm', s=12)\n"
        "fig.colorbar(sc, label='epoch')\n"
        "ax.set_xlabel('communication overhead'); ax.set_ylabel('accuracy')\n"
        "fig.tight_layout(); fig.savefig('trajectory.png', dpi=120)\n\n";
  }
  if (has("eval_history.csv")) {
    s +=
        "e = load('eval_history.csv')\n"
        "fig, ax = plt.subplots(figsize=(7, 4))\n"
        "ax.plot(col(e, 'epoch'), col(e, 'test_accuracy'), marker='o', label='test accuracy')\n"
        "ax.plot(col(e, 'epoch'), col(e, 'test_comm_overhead'), marker='o', label='test overhead')\n"
        "ax.legend(); ax.set_xlabel('epoch')\n"
        "fig.tight_layout(); fig.savefig('test_curve.png', dpi=120)\n\n";
  }
  if (has("contribution.csv")) {
    s +=
        "c = load('contribution.csv')\n"
        "fig, ax = plt.subplots(figsize=(6, 4))\n"
        "ax.bar([int(r['sensor']) + 1 for r in c], col(c, 'transmit_fraction'))\n"
        "ax.set_xlabel('sensor'); ax.set_ylabel('fraction of test scenes transmitted')\n"
        "fig.tight_layout(); fig.savefig('contribution.png', dpi=120)\n\n";
  }
  if (has("k_sweep.csv")) {
    s +=
        "k = [r for r in load('k_sweep.csv') if r['status'] == 'ok']\n"
        "fig, ax = plt.subplots(figsize=(6, 5))\n"
        "ax.plot(col(k, 'comm_overhead'), col(k, 'accuracy'), marker='o')\n"
        "for r in k:\n"
        "    ax.annotate('K=' + r['K'], (float(r['comm_overhead']), float(r['accuracy'])))\n"
        "ax.set_xlabel('communication overhead'); ax.set_ylabel('accuracy')\n"
        "fig.tight_layout(); fig.savefig('k_tradeoff.png', dpi=120)\n\n";
  }
  if (has("summary.csv")) {
    s +=
        "for r in load('summary.csv'):\n"
        "    print('{:<28} acc {:6.1%}  overhead {:6.1%}'.format(r['method'], float(r['accuracy']), float(r['comm_overhead'])))\n";
  }
  return s;
}

// Writes the tables present in `report` plus summary.json and plot.py.
// Returns the file names written (relative to `dir`).
inline std::vector<std::string> emit_report(const std::filesystem::path& dir, const Report& report) {
  if (report.methods.empty() && report.train_history.empty() && report.k_sweep.empty() &&
      report.pretrain.empty()) {
    throw ContractViolation("emit_report: nothing to report");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<std::string> files;
  if (!report.methods.empty()) {
    write_methods_csv(dir / "summary.csv", report.methods);
    files.push_back("summary.csv");
  }
  if (!report.pretrain.empty()) {
    write_pretrain_csv(dir / "pretrain_history.csv", report.pretrain);
    files.push_back("pretrain_history.csv");
  }
  if (!report.train_history.empty()) {
    write_history_csv(dir / "train_history.csv", report.train_history);
    files.push_back("train_history.csv");
  }
  if (!report.eval_history.empty()) {
    write_eval_history_csv(dir / "eval_history.csv", report.eval_history);
    files.push_back("eval_history.csv");
  }
  if (!report.test_decisions.empty()) {
    write_decisions_csv(dir / "test_decisions.csv", report.test_decisions);
    files.push_back("test_decisions.csv");
  }
  if (report.contribution) {
    write_contribution_csv(dir / "contribution.csv", *report.contribution);
    files.push_back("contribution.csv");
  }
  if (!report.k_sweep.empty()) {
    write_k_sweep_csv(dir / "k_sweep.csv", report.k_sweep);
    files.push_back("k_sweep.csv");
  }

  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["generator"] = kVersionString;
  j["note"] =
      "Synthetic multi-view dataset. Accuracy and overhead figures are for "
      "ordering the methods against each other, not absolute targets.";
  j["config"] = to_json(report.config);
  j["results"] = nlohmann::ordered_json::array();
  for (const auto& m : report.methods) {
    j["results"].push_back({{"method", m.method},
                            {"accuracy", m.accuracy},
                            {"comm_overhead", m.comm_overhead},
                            {"mean_reward_raw", m.mean_reward_raw},
                            {"mean_reward_normalized", m.mean_reward_normalized}});
  }
  if (report.contribution) j["contribution"] = report.contribution->transmit_fraction;
  if (!report.k_sweep.empty()) {
    j["k_sweep"] = nlohmann::ordered_json::array();
    for (const auto& r : report.k_sweep) {
      nlohmann::ordered_json row{{"K", r.K}, {"status", r.ok ? "ok" : "failed"}};
      if (r.ok) {
        row["accuracy"] = r.accuracy;
        row["comm_overhead"] = r.comm_overhead;
      } else {
        row["error"] = r.error;
      }
      j["k_sweep"].push_back(row);
    }
  }
  j["files"] = files;
  {
    std::ofstream os(dir / "summary.json");
    if (!os) throw IoError("cannot open " + (dir / "summary.json").string() + " for writing");
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed: " + (dir / "summary.json").string());
  }
  files.push_back("summary.json");

  {
    std::ofstream os(dir / "plot.py");
    if (!os) throw IoError("cannot open " + (dir / "plot.py").string() + " for writing");
    os << plot_script(files);
  }
  files.push_back("plot.py");
  return files;
}

}  // namespace sensordrop
