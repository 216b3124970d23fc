#include "cli.h"

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zerosweep/agents.h"
#include "zerosweep/checkpoint.h"
#include "zerosweep/errors.h"
#include "zerosweep/hyperparams.h"
#include "zerosweep/rating.h"
#include "zerosweep/report.h"
#include "zerosweep/selfplay.h"
#include "zerosweep/sweep.h"
#include "zerosweep/util.h"

namespace zs::cli {
namespace {

namespace fs = std::filesystem;

fs::path output_root() {
  const char* env = std::getenv(kOutputEnv);
  return env && *env ? fs::path(env) : fs::path("zerosweep_runs");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string game;
  int size = 0;
  std::uint64_t seed = 0;
  std::string output;
  int parallelism = 0;
  std::vector<std::string> sets;
  bool resume = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err,
              const std::atomic<bool>* stop) {
  RunConfig config;
  if (!a.config.empty()) {
    config = RunConfig::load(a.config);
  } else if (a.resume && !a.output.empty() && fs::exists(fs::path(a.output) / "config.txt")) {
    config = RunConfig::load(fs::path(a.output) / "config.txt");
  }
  if (!a.game.empty()) config.game = parse_game_kind(a.game);
  if (a.size) config.size = a.size;
  if (a.seed) config.seed = a.seed;
  if (a.parallelism) config.parallelism = a.parallelism;
  if (!a.output.empty()) config.output_dir = a.output;
  for (const std::string& s : a.sets) config.apply_override(s);
  const GameSpec spec = config.spec();
  config.params.validate();
  if (config.parallelism < 1) throw ConfigError("parallelism must be >= 1");
  if (config.output_dir.empty()) {
    config.output_dir = (output_root() / (spec_name(spec) + "_seed" + std::to_string(config.seed))).string();
  }

  const fs::path dir = config.output_dir;
  if (fs::exists(dir / "run.json") && !a.resume) {
    throw ConfigError(dir.string() + " already holds a run; pass --resume or another --output");
  }
  fs::create_directories(dir);
  write_text(dir / "config.txt", config.to_text());

  TrainOptions options;
  options.output_dir = dir;
  options.resume = a.resume;
  options.parallelism = config.parallelism;
  options.stop = stop;
  options.log = a.quiet ? nullptr : &err;
  const TrainOutcome outcome = train_full(config, options);
  out << "completed " << outcome.reports.size() << " iterations in " << dir.string() << '\n';
  return kExitOk;
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
  std::string plan;
  std::string game = "connect4";
  int size = 5;
  bool desk_scale = false;
  bool dry_run = false;
  int parallelism = 1;
  int repetitions = 0;
  std::vector<std::string> sets;
  std::string output;
  bool quiet = false;
};

SweepPlan select_plan(const SweepArgs& a, int board_size) {
  if (a.desk_scale && a.plan != "table1") throw ConfigError("--desk-scale applies to the table1 plan");
  if (a.plan == "table1") return a.desk_scale ? plan_table1_desk_scale() : plan_table1_sweep();
  if (a.plan == "correlation") return plan_correlation_grid();
  if (a.plan == "loss_targets") return plan_loss_target_study(board_size);
  if (fs::is_regular_file(a.plan)) return SweepPlan::load(a.plan);
  throw ConfigError("unknown plan '" + a.plan + "': use table1, correlation, loss_targets or a plan file");
}

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err,
              const std::atomic<bool>* stop) {
  const GameSpec spec(parse_game_kind(a.game), a.size);
  SweepPlan plan = select_plan(a, a.size);
  if (a.repetitions) {
    plan.repetitions = a.repetitions;
    plan.seeds.clear();
  }
  for (const std::string& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + s + "' is not key=value");
    plan.base.set(s.substr(0, eq), s.substr(eq + 1));
  }
  plan.validate();
  if (a.parallelism < 1) throw ConfigError("parallelism must be >= 1");

  const auto settings = plan.settings();
  const auto seeds = plan.run_seeds();
  out << plan.name << ": " << settings.size() << " settings x " << seeds.size() << " seeds = "
      << settings.size() * seeds.size() << " runs scheduled\n";

  SweepOptions options;
  options.output_dir = a.output.empty()
                           ? output_root() / ("sweep_" + plan.name + "_" + spec_name(spec))
                           : fs::path(a.output);
  options.parallelism = a.parallelism;
  options.dry_run = a.dry_run;
  options.stop = stop;
  options.log = a.quiet ? nullptr : &err;
  const auto results = execute(plan, spec, options);
  if (a.dry_run) {
    out << "manifest written to " << options.output_dir.string() << '\n';
    return kExitOk;
  }
  const auto failed = std::count_if(results.begin(), results.end(),
                                    [](const RunResult& r) { return r.status == "failed"; });
  out << results.size() - failed << " runs complete, " << failed << " failed; results in "
      << (options.output_dir / "results.csv").string() << '\n';
  return kExitOk;
}

// ---- players ----------------------------------------------------------------

struct PlayerFile {
  std::string id;
  fs::path path;
};

bool has_wildcard(const std::string& s) { return s.find_first_of("*?[") != std::string::npos; }

std::string id_for(const fs::path& file) {
  return file.stem() == "best" ? file.parent_path().filename().string() : file.stem().string();
}

// Directories contribute every best.ckpt below them (named after the run
// directory) or, failing that, the .ckpt files they hold directly.
std::vector<PlayerFile> resolve_players(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const std::string& in : inputs) {
    const fs::path p(in);
    if (has_wildcard(p.filename().string())) {
      const fs::path parent = p.has_parent_path() ? p.parent_path() : fs::path(".");
      std::vector<fs::path> hits;
      if (fs::is_directory(parent)) {
        for (const auto& e : fs::directory_iterator(parent)) {
          if (e.is_regular_file() &&
              fnmatch(p.filename().c_str(), e.path().filename().c_str(), 0) == 0) {
            hits.push_back(e.path());
          }
        }
      }
      if (hits.empty()) throw ConfigError("no checkpoint matches " + in);
      std::sort(hits.begin(), hits.end());
      files.insert(files.end(), hits.begin(), hits.end());
    } else if (fs::is_directory(p)) {
      std::vector<fs::path> hits;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().filename() == "best.ckpt") hits.push_back(e.path());
      }
      if (hits.empty()) {
        for (const auto& e : fs::directory_iterator(p)) {
          if (e.is_regular_file() && e.path().extension() == ".ckpt") hits.push_back(e.path());
        }
      }
      if (hits.empty()) throw ConfigError("no checkpoints under " + in);
      std::sort(hits.begin(), hits.end());
      files.insert(files.end(), hits.begin(), hits.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw ConfigError(in + " does not exist");
    }
  }
  std::vector<PlayerFile> out;
  std::map<std::string, fs::path> seen;
  for (const fs::path& f : files) {
    const std::string id = id_for(f);
    if (auto [it, fresh] = seen.emplace(id, f); !fresh) {
      if (fs::equivalent(it->second, f)) continue;
      throw ConfigError("player id '" + id + "' is shared by " + it->second.string() + " and " + f.string());
    }
    out.push_back({id, f});
  }
  return out;
}

struct LoadedPlayer {
  PlayerFile file;
  LoadedCheckpoint ckpt;
};

std::vector<LoadedPlayer> load_players(const std::vector<PlayerFile>& files) {
  std::vector<LoadedPlayer> players;
  for (const PlayerFile& f : files) {
    try {
      players.push_back({f, load_checkpoint_file(f.path)});
    } catch (const CheckpointError& e) {
      throw ConfigError(f.path.string() + ": " + e.what());
    }
  }
  if (players.empty()) return players;
  // The most common game/size is the reference; everything else is listed.
  std::map<std::string, int> count;
  for (const auto& p : players) ++count[spec_name(p.ckpt.weights.spec())];
  const std::string majority =
      std::max_element(count.begin(), count.end(),
                       [](const auto& x, const auto& y) { return x.second < y.second; })
          ->first;
  std::string offenders;
  for (const auto& p : players) {
    const std::string s = spec_name(p.ckpt.weights.spec());
    if (s != majority) offenders += "\n  " + p.file.path.string() + " (" + s + ")";
  }
  if (!offenders.empty()) {
    throw ConfigError("checkpoints for a game other than " + majority + ":" + offenders);
  }
  return players;
}

SearchConfig search_for(const LoadedPlayer& p, int m, double c) {
  SearchConfig s;
  const nlohmann::json& h = p.ckpt.metadata.hyperparams;
  s.m = m > 0 ? m : (h.contains("m") ? h.at("m").get<int>() : s.m);
  s.c = c > 0 ? c : (h.contains("c") ? h.at("c").get<double>() : s.c);
  return s;
}

// ---- arena ------------------------------------------------------------------

struct ArenaArgs {
  std::string challenger;
  std::string incumbent;
  int games = 40;
  double threshold = 0.6;
  int m = 0;
  double c = 0.0;
  std::uint64_t seed = 1;
  int parallelism = 1;
};

int cmd_arena(const ArenaArgs& a, std::ostream& out) {
  std::vector<PlayerFile> files;
  for (const std::string& s : {a.challenger, a.incumbent}) {
    if (s != "random") files.push_back({id_for(s), s});
  }
  if (files.empty()) throw ConfigError("arena needs at least one checkpoint");
  const auto loaded = load_players(files);
  const GameSpec spec = loaded.front().ckpt.weights.spec();
  auto make = [&](const std::string& s, std::size_t& next) -> std::shared_ptr<const Agent> {
    if (s == "random") return std::make_shared<RandomAgent>("random");
    const LoadedPlayer& p = loaded[next++];
    return std::make_shared<MctsAgent>(p.file.id, std::make_shared<NetworkWeights>(p.ckpt.weights),
                                       search_for(p, a.m, a.c));
  };
  std::size_t next = 0;
  const auto challenger = make(a.challenger, next);
  const auto incumbent = make(a.incumbent, next);
  if (a.games < 1) throw ConfigError("--games must be >= 1");
  const ArenaResult r = arena(*challenger, *incumbent, spec, a.games, a.threshold, a.seed, a.parallelism);
  const nlohmann::json j = {{"challenger", a.challenger}, {"incumbent", a.incumbent},
                            {"game", spec_name(spec)},    {"games", a.games},
                            {"wins", r.wins},             {"draws", r.draws},
                            {"losses", r.losses},         {"threshold", a.threshold},
                            {"accepted", r.accepted}};
  out << j.dump() << '\n';
  return kExitOk;
}

// ---- tournament -------------------------------------------------------------

struct TournamentArgs {
  std::vector<std::string> inputs;
  int rounds = 1;
  int games_per_pair = 10;
  bool include_random = false;
  bool dry_run = false;
  int m = 0;
  double c = 0.0;
  std::uint64_t seed = 1;
  int parallelism = 1;
  std::string output;
};

int cmd_tournament(const TournamentArgs& a, std::ostream& out) {
  const auto players = load_players(resolve_players(a.inputs));
  if (players.size() + (a.include_random ? 1 : 0) < 2) {
    throw ConfigError("a tournament needs at least two players; found " +
                      std::to_string(players.size()) + " checkpoint(s)" +
                      (a.include_random ? " and the random player" : ""));
  }
  if (players.empty()) throw ConfigError("a tournament needs at least one checkpoint");
  if (a.rounds < 1 || a.games_per_pair < 1) throw ConfigError("rounds and games per pair must be >= 1");
  const GameSpec spec = players.front().ckpt.weights.spec();

  std::vector<std::shared_ptr<const Agent>> agents;
  std::vector<std::string> ids;
  nlohmann::json roster = nlohmann::json::array();
  for (const LoadedPlayer& p : players) {
    if (a.dry_run) {
      agents.push_back(std::make_shared<FirstLegalAgent>(p.file.id));
    } else {
      agents.push_back(std::make_shared<MctsAgent>(
          p.file.id, std::make_shared<NetworkWeights>(p.ckpt.weights), search_for(p, a.m, a.c)));
    }
    ids.push_back(p.file.id);
    roster.push_back({{"id", p.file.id}, {"path", p.file.path.string()}});
  }
  if (a.include_random) {
    if (std::find(ids.begin(), ids.end(), "random") != ids.end()) {
      throw ConfigError("a checkpoint is already named 'random'");
    }
    agents.push_back(std::make_shared<RandomAgent>("random"));
    ids.push_back("random");
    roster.push_back({{"id", "random"}, {"path", nullptr}});
  }

  const std::size_t n = agents.size();
  const std::size_t pairs = n * (n - 1) / 2;
  const std::size_t games = pairs * a.rounds * a.games_per_pair;
  out << n << " players, " << pairs << " pairs, " << games << " games"
      << (a.dry_run ? " (dry run with stub agents)" : "") << '\n';

  const fs::path dir = a.output.empty()
                           ? output_root() / ("tournament_" + spec_name(spec) + "_seed" + std::to_string(a.seed))
                           : fs::path(a.output);
  fs::create_directories(dir);
  const auto records = round_robin(agents, spec, a.rounds, a.games_per_pair, a.seed, a.parallelism);
  const EloTable table = fit_mle_elo(records, ids);
  {
    std::ofstream f(dir / "matches.csv", std::ios::trunc);
    write_match_csv(f, records);
  }
  {
    std::ofstream f(dir / "ratings.csv", std::ios::trunc);
    write_rating_csv(f, table);
  }
  const nlohmann::json manifest = {{"game", std::string(to_string(spec.kind()))},
                                   {"size", spec.board_size()},
                                   {"players", roster},
                                   {"rounds", a.rounds},
                                   {"games_per_pair", a.games_per_pair},
                                   {"include_random", a.include_random},
                                   {"dry_run", a.dry_run},
                                   {"seed", a.seed},
                                   {"pairs", pairs},
                                   {"games", records.size()}};
  write_text(dir / "tournament.json", manifest.dump(2) + "\n");
  out << table.players.size() << " rated players; ratings in " << (dir / "ratings.csv").string() << '\n';
  for (const RatedPlayer& p : table.players) {
    out << "  " << p.id << "  " << format_double(std::round(p.elo * 10) / 10) << '\n';
  }
  return kExitOk;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string output;
  std::string ratings;
};

int cmd_report(const ReportArgs& a, std::ostream& out) {
  std::vector<fs::path> inputs(a.inputs.begin(), a.inputs.end());
  ReportOptions options;
  if (!a.ratings.empty()) options.ratings = fs::path(a.ratings);
  const fs::path dir = a.output.empty() ? output_root() / "report" : fs::path(a.output);
  for (const fs::path& p : write_report(inputs, dir, options)) out << p.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const std::atomic<bool>* stop) {
  CLI::App app{"Self-play training, sweeps and tournaments for small board games", "zerosweep"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Run the self-play training loop");
  t->add_option("--config", train.config, "Flat key = value configuration file");
  t->add_option("--game", train.game, "othello, connect4 or gobang");
  t->add_option("--size", train.size, "Board size (5 or 6)");
  t->add_option("--seed", train.seed, "Run seed");
  t->add_option("--output", train.output, "Run directory");
  t->add_option("--parallelism", train.parallelism, "Worker threads");
  t->add_option("--set", train.sets, "key=value override, repeatable");
  t->add_flag("--resume", train.resume, "Continue the run in the output directory");
  t->add_flag("-q,--quiet", train.quiet, "No per-iteration log");

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "Execute a sweep plan");
  s->add_option("plan", sweep.plan, "table1, correlation, loss_targets or a plan JSON file")->required();
  s->add_option("--game", sweep.game, "othello, connect4 or gobang");
  s->add_option("--size", sweep.size, "Board size (5 or 6)");
  s->add_flag("--desk-scale", sweep.desk_scale, "Shrink the table1 budgets to desk scale");
  s->add_flag("--dry-run", sweep.dry_run, "Write the manifest without training");
  s->add_option("--parallelism", sweep.parallelism, "Concurrent runs");
  s->add_option("--repetitions", sweep.repetitions, "Seeds per setting");
  s->add_option("--set", sweep.sets, "key=value override of the base setting, repeatable");
  s->add_option("--output", sweep.output, "Sweep directory");
  s->add_flag("-q,--quiet", sweep.quiet, "No per-run log");

  ArenaArgs ar;
  auto* a = app.add_subcommand("arena", "Play a match between two players");
  a->add_option("challenger", ar.challenger, "Checkpoint or 'random'")->required();
  a->add_option("incumbent", ar.incumbent, "Checkpoint or 'random'")->required();
  a->add_option("--games", ar.games, "Games to play");
  a->add_option("--threshold", ar.threshold, "Acceptance threshold u");
  a->add_option("--m", ar.m, "Simulations per move (default: from the checkpoint)");
  a->add_option("--c", ar.c, "Exploration constant (default: from the checkpoint)");
  a->add_option("--seed", ar.seed, "Match seed");
  a->add_option("--parallelism", ar.parallelism, "Worker threads");

  TournamentArgs tour;
  auto* r = app.add_subcommand("tournament", "Round robin over checkpoints with MLE Elo");
  r->add_option("inputs", tour.inputs, "Checkpoints, directories or globs")->required();
  r->add_option("--rounds", tour.rounds, "Round-robin rounds");
  r->add_option("--games-per-pair", tour.games_per_pair, "Games per pair and round");
  r->add_flag("--include-random", tour.include_random, "Add the uniform-random player");
  r->add_flag("--dry-run", tour.dry_run, "Stub agents: check the schedule without searching");
  r->add_option("--m", tour.m, "Simulations per move (default: from each checkpoint)");
  r->add_option("--c", tour.c, "Exploration constant (default: from each checkpoint)");
  r->add_option("--seed", tour.seed, "Tournament seed");
  r->add_option("--parallelism", tour.parallelism, "Worker threads");
  r->add_option("--output", tour.output, "Tournament directory");

  ReportArgs rep;
  auto* p = app.add_subcommand("report", "Plot-ready tables from runs and sweeps");
  p->add_option("inputs", rep.inputs, "Sweep directories, run directories or metrics files")->required();
  p->add_option("--output", rep.output, "Directory for the CSV tables");
  p->add_option("--ratings", rep.ratings, "Tournament rating CSV for the Elo column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (t->parsed()) return cmd_train(train, out, err, stop);
    if (s->parsed()) return cmd_sweep(sweep, out, err, stop);
    if (a->parsed()) return cmd_arena(ar, out);
    if (r->parsed()) return cmd_tournament(tour, out);
    return cmd_report(rep, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Interrupted& e) {
    err << "interrupted: " << e.what() << '\n';
    return kExitInterrupted;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace zs::cli
