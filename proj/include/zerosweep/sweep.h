#pragma once

// Experiment plans over the hyper-parameters, their execution as a pool of
// independent training runs, and the time / strength analyses on top.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "zerosweep/hyperparams.h"
#include "zerosweep/selfplay.h"

namespace zs {

enum class SweepMode { kOneFactor, kFullGrid };

struct SweepAxis {
  std::string name;
  std::vector<nlohmann::json> values;  // scalars accepted by HyperParams::set_value

  bool operator==(const SweepAxis&) const = default;
};

struct SweepSetting {
  std::string id;          // "default", "m=25", "I=25,E=10,m=25,ep=5"
  std::string axis;        // OneFactor: the swept parameter ("" for the default)
  std::string axis_value;  // its value as text
  HyperParams params;
};

struct SweepPlan {
  std::string name;
  HyperParams base;
  std::vector<SweepAxis> axes;
  SweepMode mode = SweepMode::kOneFactor;
  int repetitions = 1;
  std::vector<std::uint64_t> seeds;  // empty: 1..repetitions

  // Throws ConfigError on unknown parameters or invalid values.
  void validate() const;
  // OneFactor: the base once, then every axis value that differs from it.
  // FullGrid: the cartesian product in axis order, last axis fastest.
  std::vector<SweepSetting> settings() const;
  std::vector<std::uint64_t> run_seeds() const;

  nlohmann::json to_json() const;
  static SweepPlan from_json(const nlohmann::json& j);
  static SweepPlan load(const std::filesystem::path& path);
};

// Minimum / default / maximum of the twelve parameters, one factor at a time.
SweepPlan plan_table1_sweep();
// The same axes shrunk to desk budgets (I <= 20, E <= 10, m <= 50).
SweepPlan plan_table1_desk_scale();
// 3^4 grid over I, E, m, ep with the arena stage removed.
SweepPlan plan_correlation_grid();
// The four loss targets, eight runs each; longer training on 5x5 boards.
SweepPlan plan_loss_target_study(int board_size);

struct RunResult {
  std::string run_id;
  std::string setting_id;
  std::string axis;
  std::string axis_value;
  HyperParams params;
  std::uint64_t seed = 0;
  std::string status = "pending";  // pending, complete, failed
  std::string error;
  std::string directory;  // relative to the sweep directory
  int workers = 1;        // concurrent runs when this one was timed
  double selfplay_seconds = 0.0;
  double training_seconds = 0.0;
  double arena_seconds = 0.0;
  double total_seconds = 0.0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double training_elo = 1000.0;
  double elo = std::numeric_limits<double>::quiet_NaN();  // filled by a tournament

  nlohmann::json to_json() const;
  static RunResult from_json(const nlohmann::json& j);
};

// Sums stage timings over iterations and picks the final loss and rating.
void summarize_run(const std::vector<IterationReport>& reports, RunResult& result);

struct SweepOptions {
  std::filesystem::path output_dir;
  int parallelism = 1;  // concurrent runs
  bool dry_run = false;  // write the manifest and stop
  const std::atomic<bool>* stop = nullptr;
  std::ostream* log = nullptr;
};

// Runs every (setting, seed) pair through train_full under
// <output>/runs/<run_id>. sweep.json and results.csv are rewritten after
// every finished run; completed runs found there are not run again. A failed
// run is recorded and the sweep carries on.
std::vector<RunResult> execute(const SweepPlan& plan, const GameSpec& spec,
                               const SweepOptions& options);

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results);

struct ParetoPoint {
  double time = 0.0;
  double elo = 0.0;
  int index = 0;  // caller's tag

  bool operator==(const ParetoPoint&) const = default;
};

// Points not dominated by another (time <=, elo >=, one strictly), by
// ascending time (then descending Elo, then index).
std::vector<ParetoPoint> pareto_front(std::vector<ParetoPoint> points);

struct TimeRow {
  std::string parameter;
  std::string min_value, default_value, max_value;
  double time_min = 0.0, time_default = 0.0, time_max = 0.0;  // mean seconds
  double ratio = 1.0;  // slower / faster of the min and max settings
  bool time_sensitive = false;
};

// One row per OneFactor axis. A parameter is time-sensitive when its min and
// max settings differ in mean total time by more than `threshold`.
std::vector<TimeRow> time_report(const SweepPlan& plan, const std::vector<RunResult>& results,
                                 double threshold = 1.25);
void write_time_csv(std::ostream& out, const std::vector<TimeRow>& rows);

}  // namespace zs
