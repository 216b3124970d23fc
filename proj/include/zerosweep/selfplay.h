#pragma once

// The training loop: self-play episodes fill a replay buffer, a copy of the
// best network trains on the recent part of it, and an arena decides whether
// the trained copy replaces the best one.

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "json.hpp"
#include "zerosweep/agents.h"
#include "zerosweep/hyperparams.h"
#include "zerosweep/mcts.h"
#include "zerosweep/net.h"
#include "zerosweep/rating.h"

namespace zs {

// Examples grouped by the iteration that produced them. Holds at most
// `capacity` iterations; the oldest are dropped first.
class ReplayBuffer {
 public:
  struct Slot {
    int iteration = 0;
    std::vector<TrainingExample> examples;
  };

  explicit ReplayBuffer(int capacity);

  int capacity() const { return capacity_; }
  const std::deque<Slot>& slots() const { return slots_; }
  std::size_t example_count() const;

  void add(int iteration, std::vector<TrainingExample> examples);
  // Examples of the newest min(rs, held) iterations, oldest first.
  std::vector<const TrainingExample*> window(int rs) const;

  std::vector<std::uint8_t> serialize() const;
  static ReplayBuffer deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::filesystem::path& path) const;
  static ReplayBuffer load(const std::filesystem::path& path);

  bool operator==(const ReplayBuffer&) const;

 private:
  int capacity_;
  std::deque<Slot> slots_;
};

struct EpisodeStep {
  GameState state;
  std::vector<double> pi;
};

struct Episode {
  std::vector<TrainingExample> examples;
  int plies = 0;
  Outcome outcome = Outcome::kOngoing;
};

// Labels each step with z from the view of its player to move and, when
// `augment` is set, adds every board symmetry of it.
std::vector<TrainingExample> label_examples(const std::vector<EpisodeStep>& steps, Outcome result,
                                            bool augment, int iteration);

// One self-play game. Positions with a single legal move skip the search;
// their pi is that move with probability one, as a search would give.
Episode run_episode(const Evaluator& evaluator, const GameSpec& spec, const HyperParams& params,
                    std::uint64_t seed, int iteration = 0);

struct ArenaResult {
  bool enabled = false;
  int wins = 0;  // challenger's view
  int draws = 0;
  int losses = 0;
  bool accepted = false;
  std::vector<double> scores;  // challenger's score per game, in play order
};

// wins / (wins + losses) > u; a tally without decisive games is rejected.
bool arena_accepts(int wins, int losses, double u);

// n games; the challenger moves first in even-numbered games, so it is P1
// in ceil(n/2) of them.
ArenaResult arena(const Agent& challenger, const Agent& incumbent, const GameSpec& spec, int n,
                  double u, std::uint64_t seed, int parallelism = 1);

struct StageTimings {
  double selfplay = 0.0;
  double training = 0.0;
  double arena = 0.0;
  double total = 0.0;  // whole iteration, measured separately
};

struct IterationReport {
  int iteration = 0;  // 1-based
  std::vector<LossBreakdown> epoch_losses;
  int examples = 0;        // produced this iteration, after augmentation
  int train_examples = 0;  // size of the training window
  int plies = 0;
  ArenaResult arena;
  TrainingElo elo;
  StageTimings timings;

  // Deterministic fields only; timings go through timings_json().
  nlohmann::json to_json() const;
  nlohmann::json timings_json() const;
  static IterationReport from_json(const nlohmann::json& j);
};

struct IterationInput {
  const GameSpec& spec;
  const HyperParams& params;
  int iteration = 1;
  std::uint64_t run_seed = 0;
  double incumbent_elo = 1000.0;
  int parallelism = 1;
  const std::atomic<bool>* stop = nullptr;
};

struct IterationResult {
  NetworkWeights best;
  bool accepted = false;
  IterationReport report;
};

// Stages 1-3 of one iteration. The buffer gains this iteration's examples.
IterationResult run_iteration(const NetworkWeights& best, ReplayBuffer& buffer,
                              const IterationInput& input);

struct TrainOptions {
  std::filesystem::path output_dir;  // empty: nothing is written
  bool resume = false;
  int parallelism = 1;
  const std::atomic<bool>* stop = nullptr;
  std::ostream* log = nullptr;
  // Called after every completed iteration.
  std::function<void(const IterationReport&)> on_iteration;
};

struct TrainOutcome {
  NetworkWeights best;
  std::vector<IterationReport> reports;
};

// Runs params.I iterations. With an output directory it keeps
//   metrics.jsonl   one IterationReport per line
//   timings.jsonl   per-iteration stage seconds
//   <game>_<size>_iter<k>.ckpt for the initial and every accepted model,
//   best.ckpt, buffer_<k>.bin and run.json (config, progress, Elo state).
// run.json is written last, so a run stopped at any point resumes from the
// last iteration it records. Throws Interrupted when `stop` is raised.
TrainOutcome train_full(const RunConfig& config, const TrainOptions& options = {});

std::string checkpoint_name(const GameSpec& spec, int iteration);

struct MatchTally {
  int wins = 0;
  int draws = 0;
  int losses = 0;
};

// Greedy search with `weights` against the uniform-random player, colors
// alternating game by game.
MatchTally evaluate_vs_random(std::shared_ptr<const NetworkWeights> weights,
                              const SearchConfig& search, int games, std::uint64_t seed,
                              int parallelism = 1);

}  // namespace zs
