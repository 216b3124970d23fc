#pragma once

// Plot-ready tables built from run and sweep directories. No plotting.
//
//   loss_vs_iteration.csv   group,run,iteration,epoch,total,policy,value
//   training_elo.csv        group,iteration,runs,mean_elo,std_elo
//   elo_vs_time.csv         group,run,total_s,elo,source,pareto
//   time_table.csv          see write_time_csv (one-factor sweeps only)

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zerosweep/selfplay.h"
#include "zerosweep/sweep.h"

namespace zs {

// One run's metrics. Errors name the file and line.
std::vector<IterationReport> load_metrics(const std::filesystem::path& metrics_file);

// player -> elo from a rating CSV.
std::map<std::string, double> load_ratings(const std::filesystem::path& rating_csv);

struct RunSeries {
  std::string group;  // setting id inside a sweep, directory name otherwise
  std::string run;
  std::vector<IterationReport> reports;
  std::optional<RunResult> result;  // present for sweep runs
};

// Accepts sweep directories (sweep.json), run directories (metrics.jsonl)
// and metrics files. Throws ConfigError when nothing usable is found.
std::vector<RunSeries> collect_runs(const std::vector<std::filesystem::path>& inputs);

struct ReportOptions {
  std::optional<std::filesystem::path> ratings;  // tournament Elo by run id
};

// Writes the tables into `out_dir` and returns their paths.
std::vector<std::filesystem::path> write_report(const std::vector<std::filesystem::path>& inputs,
                                                const std::filesystem::path& out_dir,
                                                const ReportOptions& options = {});

}  // namespace zs
