#include "zerosweep/report.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "zerosweep/errors.h"
#include "zerosweep/util.h"

namespace zs {
namespace fs = std::filesystem;
namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

std::string num(double x) { return std::isfinite(x) ? format_double(x) : ""; }

}  // namespace

std::vector<IterationReport> load_metrics(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw ConfigError("cannot read " + file.string());
  std::vector<IterationReport> out;
  std::string line;
  int number = 0;
  while (std::getline(f, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(IterationReport::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(file.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, double> load_ratings(const fs::path& csv) {
  std::ifstream f(csv);
  if (!f) throw ConfigError("cannot read " + csv.string());
  std::string line;
  std::getline(f, line);
  if (line.rfind("player,games,wins,draws,losses,elo", 0) != 0) {
    throw ConfigError(csv.string() + ":1: not a rating table");
  }
  std::map<std::string, double> out;
  int number = 1;
  while (std::getline(f, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    double elo = 0.0;
    try {
      if (cells.size() != 6) throw std::invalid_argument("column count");
      std::size_t used = 0;
      elo = std::stod(cells[5], &used);
      if (used != cells[5].size()) throw std::invalid_argument("elo");
    } catch (const std::exception&) {
      throw ConfigError(csv.string() + ":" + std::to_string(number) + ": malformed rating row");
    }
    out[cells[0]] = elo;
  }
  return out;
}

std::vector<RunSeries> collect_runs(const std::vector<fs::path>& inputs) {
  std::vector<RunSeries> out;
  for (const fs::path& in : inputs) {
    if (!fs::exists(in)) throw ConfigError(in.string() + " does not exist");
    if (fs::is_directory(in) && fs::exists(in / "sweep.json")) {
      const nlohmann::json m = read_json(in / "sweep.json");
      try {
        for (const auto& j : m.at("runs")) {
          RunResult r = RunResult::from_json(j);
          if (r.status != "complete") continue;
          out.push_back({r.setting_id, r.run_id, load_metrics(in / r.directory / "metrics.jsonl"), r});
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError((in / "sweep.json").string() + ": " + e.what());
      }
    } else if (fs::is_directory(in) && fs::exists(in / "metrics.jsonl")) {
      const std::string name = fs::absolute(in).lexically_normal().filename().string();
      out.push_back({name, name, load_metrics(in / "metrics.jsonl"), std::nullopt});
    } else if (fs::is_regular_file(in)) {
      const std::string name = in.parent_path().filename().string();
      out.push_back({name, in.string(), load_metrics(in), std::nullopt});
    } else if (fs::is_directory(in)) {
      // A directory of runs.
      std::vector<fs::path> children;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_directory() && (fs::exists(e.path() / "metrics.jsonl") || fs::exists(e.path() / "sweep.json"))) {
          children.push_back(e.path());
        }
      }
      std::sort(children.begin(), children.end());
      for (auto& r : collect_runs(children)) out.push_back(std::move(r));
    }
  }
  std::size_t iterations = 0;
  for (const RunSeries& s : out) iterations += s.reports.size();
  if (iterations == 0) throw ConfigError("no metrics found in the given inputs");
  return out;
}

std::vector<fs::path> write_report(const std::vector<fs::path>& inputs, const fs::path& out_dir,
                                   const ReportOptions& options) {
  const auto runs = collect_runs(inputs);
  std::map<std::string, double> ratings;
  if (options.ratings) ratings = load_ratings(*options.ratings);
  fs::create_directories(out_dir);
  std::vector<fs::path> written;

  {
    const fs::path p = out_dir / "loss_vs_iteration.csv";
    auto f = open_out(p);
    f << "group,run,iteration,epoch,total,policy,value\n";
    for (const RunSeries& s : runs) {
      for (const IterationReport& r : s.reports) {
        for (std::size_t e = 0; e < r.epoch_losses.size(); ++e) {
          const LossBreakdown& l = r.epoch_losses[e];
          f << '"' << s.group << "\"," << s.run << ',' << r.iteration << ',' << e + 1 << ','
            << num(l.total) << ',' << num(l.policy) << ',' << num(l.value) << '\n';
        }
      }
    }
    written.push_back(p);
  }

  {
    // Mean and sample standard deviation over the runs of each group.
    std::map<std::string, std::map<int, std::vector<double>>> elo;
    std::vector<std::string> order;
    for (const RunSeries& s : runs) {
      if (!elo.count(s.group)) order.push_back(s.group);
      for (const IterationReport& r : s.reports) {
        elo[s.group][r.iteration].push_back(next_incumbent_rating(r.elo, r.arena.accepted));
      }
    }
    const fs::path p = out_dir / "training_elo.csv";
    auto f = open_out(p);
    f << "group,iteration,runs,mean_elo,std_elo\n";
    for (const std::string& g : order) {
      for (const auto& [iteration, values] : elo[g]) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= values.size();
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        const double sd = values.size() > 1 ? std::sqrt(var / (values.size() - 1)) : 0.0;
        f << '"' << g << "\"," << iteration << ',' << values.size() << ',' << num(mean) << ','
          << num(sd) << '\n';
      }
    }
    written.push_back(p);
  }

  std::vector<const RunSeries*> swept;
  for (const RunSeries& s : runs) {
    if (s.result) swept.push_back(&s);
  }
  if (!swept.empty()) {
    std::vector<ParetoPoint> points;
    std::vector<std::pair<double, std::string>> elo_of(swept.size());
    for (std::size_t k = 0; k < swept.size(); ++k) {
      const RunResult& r = *swept[k]->result;
      if (auto it = ratings.find(r.run_id); it != ratings.end()) elo_of[k] = {it->second, "tournament"};
      else if (std::isfinite(r.elo)) elo_of[k] = {r.elo, "tournament"};
      else elo_of[k] = {r.training_elo, "training"};
      points.push_back({r.total_seconds, elo_of[k].first, static_cast<int>(k)});
    }
    std::vector<bool> on_front(swept.size(), false);
    for (const ParetoPoint& p : pareto_front(points)) on_front[p.index] = true;
    const fs::path p = out_dir / "elo_vs_time.csv";
    auto f = open_out(p);
    f << "group,run,total_s,elo,source,pareto\n";
    for (std::size_t k = 0; k < swept.size(); ++k) {
      const RunResult& r = *swept[k]->result;
      f << '"' << r.setting_id << "\"," << r.run_id << ',' << num(r.total_seconds) << ','
        << num(elo_of[k].first) << ',' << elo_of[k].second << ',' << (on_front[k] ? 1 : 0) << '\n';
    }
    written.push_back(p);
  }

  // Time table for every one-factor sweep among the inputs.
  std::vector<TimeRow> rows;
  for (const fs::path& in : inputs) {
    if (!fs::is_directory(in) || !fs::exists(in / "sweep.json")) continue;
    const nlohmann::json m = read_json(in / "sweep.json");
    const SweepPlan plan = SweepPlan::from_json(m.at("identity").at("plan"));
    if (plan.mode != SweepMode::kOneFactor) continue;
    std::vector<RunResult> results;
    for (const auto& j : m.at("runs")) results.push_back(RunResult::from_json(j));
    for (TimeRow& r : time_report(plan, results)) rows.push_back(std::move(r));
  }
  if (!rows.empty()) {
    const fs::path p = out_dir / "time_table.csv";
    auto f = open_out(p);
    write_time_csv(f, rows);
    written.push_back(p);
  }
  return written;
}

}  // namespace zs
