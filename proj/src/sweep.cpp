#include "zerosweep/sweep.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "zerosweep/errors.h"
#include "zerosweep/util.h"

namespace zs {
namespace {

std::string mode_name(SweepMode m) { return m == SweepMode::kOneFactor ? "one_factor" : "full_grid"; }

SweepMode parse_mode(const std::string& s) {
  if (s == "one_factor") return SweepMode::kOneFactor;
  if (s == "full_grid") return SweepMode::kFullGrid;
  throw ConfigError("unknown sweep mode '" + s + "'");
}

// Canonical text of `value` for parameter `axis`.
std::string value_text(const std::string& axis, const nlohmann::json& value) {
  HyperParams p;
  p.set_value(axis, value);
  return p.get(axis);
}

std::string csv_number(double x) { return std::isfinite(x) ? format_double(x) : ""; }

nlohmann::json number_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp);
    f << text;
    if (!f) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

SweepAxis axis(const std::string& name, std::vector<nlohmann::json> values) {
  return {name, std::move(values)};
}

}  // namespace

void SweepPlan::validate() const {
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (!seeds.empty() && static_cast<int>(seeds.size()) != repetitions) {
    throw ConfigError("plan lists " + std::to_string(seeds.size()) + " seeds for " +
                      std::to_string(repetitions) + " repetitions");
  }
  base.validate();
  const auto& keys = hyperparam_keys();
  for (const SweepAxis& a : axes) {
    if (std::find(keys.begin(), keys.end(), a.name) == keys.end()) {
      throw ConfigError("sweep axis '" + a.name + "' is not a hyper-parameter");
    }
    if (a.values.empty()) throw ConfigError("sweep axis '" + a.name + "' has no values");
  }
  for (const SweepSetting& s : settings()) {
    try {
      s.params.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("setting " + s.id + ": " + e.what());
    }
  }
}

std::vector<SweepSetting> SweepPlan::settings() const {
  std::vector<SweepSetting> out;
  if (mode == SweepMode::kOneFactor) {
    out.push_back({"default", "", "", base});
    for (const SweepAxis& a : axes) {
      for (const nlohmann::json& v : a.values) {
        HyperParams p = base;
        p.set_value(a.name, v);
        const bool seen = std::any_of(out.begin(), out.end(),
                                      [&](const SweepSetting& s) { return s.params == p; });
        if (seen) continue;
        const std::string text = p.get(a.name);
        out.push_back({a.name + "=" + text, a.name, text, p});
      }
    }
    return out;
  }
  std::vector<std::size_t> digit(axes.size(), 0);
  while (true) {
    SweepSetting s;
    s.params = base;
    for (std::size_t k = 0; k < axes.size(); ++k) {
      s.params.set_value(axes[k].name, axes[k].values[digit[k]]);
      if (k) s.id += ",";
      s.id += axes[k].name + "=" + s.params.get(axes[k].name);
    }
    if (s.id.empty()) s.id = "default";
    out.push_back(std::move(s));
    std::size_t k = axes.size();
    while (k > 0) {
      --k;
      if (++digit[k] < axes[k].values.size()) break;
      digit[k] = 0;
      if (k == 0) return out;
    }
    if (axes.empty()) return out;
  }
}

std::vector<std::uint64_t> SweepPlan::run_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> s(repetitions);
  for (int k = 0; k < repetitions; ++k) s[k] = static_cast<std::uint64_t>(k + 1);
  return s;
}

nlohmann::json SweepPlan::to_json() const {
  nlohmann::json ax = nlohmann::json::array();
  for (const SweepAxis& a : axes) ax.push_back({{"name", a.name}, {"values", a.values}});
  return {{"name", name},
          {"mode", mode_name(mode)},
          {"repetitions", repetitions},
          {"seeds", seeds},
          {"base", base.to_json()},
          {"axes", ax}};
}

SweepPlan SweepPlan::from_json(const nlohmann::json& j) {
  SweepPlan p;
  try {
    p.name = j.value("name", std::string("custom"));
    p.mode = parse_mode(j.value("mode", std::string("one_factor")));
    p.repetitions = j.value("repetitions", 1);
    if (j.contains("seeds")) p.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("base")) p.base = HyperParams::from_json(j.at("base"));
    for (const auto& a : j.at("axes")) {
      p.axes.push_back({a.at("name").get<std::string>(), a.at("values").get<std::vector<nlohmann::json>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad sweep plan: ") + e.what());
  }
  p.validate();
  return p;
}

SweepPlan SweepPlan::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read sweep plan " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

SweepPlan plan_table1_sweep() {
  SweepPlan p;
  p.name = "table1";
  p.axes = {axis("I", {50, 100, 150}),       axis("E", {10, 50, 100}),
            axis("T_prime", {10, 15, 20}),   axis("m", {25, 100, 200}),
            axis("c", {0.5, 1.0, 2.0}),      axis("rs", {1, 20, 40}),
            axis("ep", {5, 10, 15}),         axis("bs", {32, 64, 96}),
            axis("lr", {0.001, 0.005, 0.01}), axis("d", {0.2, 0.3, 0.4}),
            axis("n", {20, 40, 100}),        axis("u", {0.5, 0.6, 0.7})};
  return p;
}

SweepPlan plan_table1_desk_scale() {
  SweepPlan p = plan_table1_sweep();
  p.name = "table1_desk";
  p.base.I = 10;
  p.base.E = 5;
  p.base.m = 25;
  p.base.rs = 4;
  p.base.n = 8;
  for (SweepAxis& a : p.axes) {
    if (a.name == "I") a.values = {5, 10, 15};
    if (a.name == "E") a.values = {2, 5, 10};
    if (a.name == "m") a.values = {12, 25, 50};
    if (a.name == "rs") a.values = {1, 4, 8};
    if (a.name == "n") a.values = {4, 8, 20};
  }
  return p;
}

SweepPlan plan_correlation_grid() {
  SweepPlan p;
  p.name = "correlation";
  p.mode = SweepMode::kFullGrid;
  p.base.arena_enabled = false;
  p.axes = {axis("I", {25, 50, 75}), axis("E", {10, 20, 30}), axis("m", {25, 50, 75}),
            axis("ep", {5, 10, 15})};
  return p;
}

SweepPlan plan_loss_target_study(int board_size) {
  SweepPlan p;
  p.name = "loss_targets";
  p.mode = SweepMode::kFullGrid;
  p.repetitions = 8;
  if (board_size == 5) p.base.I = 200;
  p.axes = {axis("loss_target", {"policy_only", "value_only", "sum", "product"})};
  return p;
}

nlohmann::json RunResult::to_json() const {
  return {{"run_id", run_id},
          {"setting", setting_id},
          {"axis", axis},
          {"axis_value", axis_value},
          {"params", params.to_json()},
          {"seed", seed},
          {"status", status},
          {"error", error},
          {"directory", directory},
          {"workers", workers},
          {"selfplay_seconds", selfplay_seconds},
          {"training_seconds", training_seconds},
          {"arena_seconds", arena_seconds},
          {"total_seconds", total_seconds},
          {"final_loss", number_or_null(final_loss)},
          {"training_elo", training_elo},
          {"elo", number_or_null(elo)}};
}

RunResult RunResult::from_json(const nlohmann::json& j) {
  RunResult r;
  r.run_id = j.at("run_id").get<std::string>();
  r.setting_id = j.at("setting").get<std::string>();
  r.axis = j.at("axis").get<std::string>();
  r.axis_value = j.at("axis_value").get<std::string>();
  r.params = HyperParams::from_json(j.at("params"));
  r.seed = j.at("seed").get<std::uint64_t>();
  r.status = j.at("status").get<std::string>();
  r.error = j.value("error", std::string());
  r.directory = j.at("directory").get<std::string>();
  r.workers = j.value("workers", 1);
  r.selfplay_seconds = j.at("selfplay_seconds").get<double>();
  r.training_seconds = j.at("training_seconds").get<double>();
  r.arena_seconds = j.at("arena_seconds").get<double>();
  r.total_seconds = j.at("total_seconds").get<double>();
  r.final_loss = number_or_nan(j.at("final_loss"));
  r.training_elo = j.at("training_elo").get<double>();
  r.elo = number_or_nan(j.at("elo"));
  return r;
}

void summarize_run(const std::vector<IterationReport>& reports, RunResult& r) {
  r.selfplay_seconds = r.training_seconds = r.arena_seconds = r.total_seconds = 0.0;
  for (const IterationReport& it : reports) {
    r.selfplay_seconds += it.timings.selfplay;
    r.training_seconds += it.timings.training;
    r.arena_seconds += it.timings.arena;
    r.total_seconds += it.timings.total;
  }
  if (!reports.empty()) {
    const IterationReport& last = reports.back();
    if (!last.epoch_losses.empty()) r.final_loss = last.epoch_losses.back().total;
    r.training_elo = next_incumbent_rating(last.elo, last.arena.accepted);
  }
}

namespace {

// Timings of a resumed run come from its timings file, since the reports
// rebuilt from metrics carry none.
void fill_timings(const std::filesystem::path& run_dir, std::vector<IterationReport>& reports) {
  std::ifstream f(run_dir / "timings.jsonl");
  std::string line;
  std::map<int, StageTimings> by_iteration;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    by_iteration[j.at("iteration").get<int>()] = {j.at("selfplay").get<double>(), j.at("training").get<double>(),
                                                 j.at("arena").get<double>(), j.at("total").get<double>()};
  }
  for (IterationReport& r : reports) {
    if (auto it = by_iteration.find(r.iteration); it != by_iteration.end()) r.timings = it->second;
  }
}

}  // namespace

std::vector<RunResult> execute(const SweepPlan& plan, const GameSpec& spec,
                               const SweepOptions& options) {
  namespace fs = std::filesystem;
  plan.validate();
  if (options.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (options.output_dir.empty()) throw ConfigError("a sweep needs an output directory");
  const fs::path dir = options.output_dir;
  fs::create_directories(dir / "runs");
  const fs::path manifest = dir / "sweep.json";
  const fs::path csv = dir / "results.csv";

  std::vector<RunResult> results;
  const auto settings = plan.settings();
  const auto seeds = plan.run_seeds();
  for (std::size_t s = 0; s < settings.size(); ++s) {
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      RunResult r;
      char id[64];
      std::snprintf(id, sizeof id, "run_%04zu_seed%llu", s, static_cast<unsigned long long>(seeds[k]));
      r.run_id = id;
      r.setting_id = settings[s].id;
      r.axis = settings[s].axis;
      r.axis_value = settings[s].axis_value;
      r.params = settings[s].params;
      r.seed = seeds[k];
      r.directory = (fs::path("runs") / r.run_id).string();
      results.push_back(std::move(r));
    }
  }

  const nlohmann::json identity = {{"plan", plan.to_json()},
                                   {"game", std::string(to_string(spec.kind()))},
                                   {"size", spec.board_size()}};
  if (fs::exists(manifest)) {
    nlohmann::json old;
    try {
      std::ifstream f(manifest);
      old = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(manifest.string() + ": " + e.what());
    }
    if (old.at("identity") != identity) {
      throw ConfigError(manifest.string() + " belongs to a different sweep");
    }
    const auto& runs = old.at("runs");
    for (std::size_t k = 0; k < results.size() && k < runs.size(); ++k) {
      RunResult previous = RunResult::from_json(runs[k]);
      if (previous.run_id == results[k].run_id && previous.status == "complete") results[k] = previous;
    }
  }

  std::mutex mu;
  auto persist = [&] {
    nlohmann::json runs = nlohmann::json::array();
    for (const RunResult& r : results) runs.push_back(r.to_json());
    const nlohmann::json m = {{"identity", identity},
                              {"settings", settings.size()},
                              {"seeds", seeds},
                              {"workers", options.parallelism},
                              {"runs", runs}};
    write_text_atomic(manifest, m.dump(2) + "\n");
    std::ostringstream table;
    write_results_csv(table, results);
    write_text_atomic(csv, table.str());
  };
  persist();
  if (options.dry_run) return results;

  std::vector<std::size_t> todo;
  for (std::size_t k = 0; k < results.size(); ++k) {
    if (results[k].status != "complete") todo.push_back(k);
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> interrupted{false};
  auto worker = [&] {
    while (true) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= todo.size() || interrupted) return;
      RunResult r;
      {
        std::lock_guard lock(mu);
        r = results[todo[slot]];
      }
      RunConfig config;
      config.game = spec.kind();
      config.size = spec.board_size();
      config.params = r.params;
      config.seed = r.seed;
      config.output_dir = (dir / r.directory).string();
      TrainOptions train;
      train.output_dir = config.output_dir;
      train.resume = true;
      train.stop = options.stop;
      r.workers = options.parallelism;
      try {
        TrainOutcome out = train_full(config, train);
        fill_timings(train.output_dir, out.reports);
        summarize_run(out.reports, r);
        r.status = "complete";
        r.error.clear();
      } catch (const Interrupted&) {
        interrupted = true;
        return;
      } catch (const std::exception& e) {
        r.status = "failed";
        r.error = e.what();
      }
      std::lock_guard lock(mu);
      results[todo[slot]] = r;
      persist();
      if (options.log) {
        *options.log << r.run_id << " " << r.setting_id << " " << r.status;
        if (r.status == "complete") *options.log << " " << r.total_seconds << "s";
        else *options.log << ": " << r.error;
        *options.log << std::endl;
      }
    }
  };
  const int workers = std::min<int>(options.parallelism, std::max<int>(1, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (interrupted) throw Interrupted("sweep stopped; completed runs are recorded");
  return results;
}

void write_results_csv(std::ostream& out, const std::vector<RunResult>& results) {
  out << "run_id,setting,axis,axis_value";
  for (const auto& k : table1_parameters()) out << ',' << k;
  out << ",loss_target,arena_enabled,seed,status,workers,selfplay_s,training_s,arena_s,total_s,"
         "final_loss,training_elo,elo\n";
  for (const RunResult& r : results) {
    // Settings ids may hold commas.
    out << r.run_id << ",\"" << r.setting_id << "\"," << r.axis << ',' << r.axis_value;
    for (const auto& k : table1_parameters()) out << ',' << r.params.get(k);
    out << ',' << r.params.get("loss_target") << ',' << r.params.get("arena_enabled") << ','
        << r.seed << ',' << r.status << ',' << r.workers << ',' << csv_number(r.selfplay_seconds)
        << ',' << csv_number(r.training_seconds) << ',' << csv_number(r.arena_seconds) << ','
        << csv_number(r.total_seconds) << ',' << csv_number(r.final_loss) << ','
        << csv_number(r.training_elo) << ',' << csv_number(r.elo) << '\n';
  }
}

std::vector<ParetoPoint> pareto_front(std::vector<ParetoPoint> points) {
  std::sort(points.begin(), points.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.elo != b.elo) return a.elo > b.elo;
    return a.index < b.index;
  });
  // After the sort, a point is dominated exactly when an earlier point has a
  // higher Elo, or the same Elo at a lower time.
  std::vector<ParetoPoint> front;
  double best_elo = -std::numeric_limits<double>::infinity();
  double best_time = 0.0;
  for (const ParetoPoint& p : points) {
    const bool dominated = p.elo < best_elo || (p.elo == best_elo && best_time < p.time);
    if (!dominated) front.push_back(p);
    if (p.elo > best_elo) {
      best_elo = p.elo;
      best_time = p.time;
    }
  }
  return front;
}

std::vector<TimeRow> time_report(const SweepPlan& plan, const std::vector<RunResult>& results,
                                 double threshold) {
  if (plan.mode != SweepMode::kOneFactor) throw ConfigError("time report needs a one-factor plan");
  std::map<std::string, std::pair<double, int>> by_setting;
  for (const RunResult& r : results) {
    if (r.status != "complete") continue;
    auto& [sum, count] = by_setting[r.setting_id];
    sum += r.total_seconds;
    ++count;
  }
  auto mean_time = [&](const std::string& setting) {
    const auto it = by_setting.find(setting);
    if (it == by_setting.end()) return std::numeric_limits<double>::quiet_NaN();
    return it->second.first / it->second.second;
  };
  auto setting_of = [&](const std::string& axis_name, const nlohmann::json& v) {
    HyperParams p = plan.base;
    p.set_value(axis_name, v);
    return p == plan.base ? std::string("default") : axis_name + "=" + p.get(axis_name);
  };
  std::vector<TimeRow> rows;
  for (const SweepAxis& a : plan.axes) {
    std::vector<nlohmann::json> values = a.values;
    if (std::all_of(values.begin(), values.end(), [](const auto& v) { return v.is_number(); })) {
      std::stable_sort(values.begin(), values.end(),
                       [](const auto& x, const auto& y) { return x.template get<double>() < y.template get<double>(); });
    }
    TimeRow row;
    row.parameter = a.name;
    row.min_value = value_text(a.name, values.front());
    row.max_value = value_text(a.name, values.back());
    row.default_value = plan.base.get(a.name);
    row.time_min = mean_time(setting_of(a.name, values.front()));
    row.time_max = mean_time(setting_of(a.name, values.back()));
    row.time_default = mean_time("default");
    const double lo = std::min(row.time_min, row.time_max);
    const double hi = std::max(row.time_min, row.time_max);
    row.ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::quiet_NaN();
    row.time_sensitive = row.ratio > threshold;
    rows.push_back(row);
  }
  return rows;
}

void write_time_csv(std::ostream& out, const std::vector<TimeRow>& rows) {
  out << "parameter,min_value,default_value,max_value,time_min_s,time_default_s,time_max_s,ratio,"
         "class\n";
  for (const TimeRow& r : rows) {
    out << r.parameter << ',' << r.min_value << ',' << r.default_value << ',' << r.max_value << ','
        << csv_number(r.time_min) << ',' << csv_number(r.time_default) << ','
        << csv_number(r.time_max) << ',' << csv_number(r.ratio) << ','
        << (r.time_sensitive ? "time-sensitive" : "time-friendly") << '\n';
  }
}

}  // namespace zs
