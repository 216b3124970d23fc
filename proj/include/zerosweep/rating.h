#pragma once

// Elo ratings: the incremental per-game update used to follow training, a
// maximum-likelihood fit over a body of games for tournaments, and the
// round-robin scheduler.
//
// Draws count as half a win and half a loss throughout.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "zerosweep/agents.h"
#include "zerosweep/games.h"

namespace zs {

// E_A = 1 / (1 + 10^((r_b - r_a) / 400)).
double expected_score(double r_a, double r_b);
// r_a + k * (s_a - e_a).
double incremental_update(double r_a, double e_a, double s_a, double k);

// Ratings of the incumbent and the challenger after one iteration's arena.
struct TrainingElo {
  double incumbent = 1000.0;
  double challenger = 1000.0;

  bool operator==(const TrainingElo&) const = default;
};

// One iteration of the training track. The challenger enters at the
// incumbent's rating; both are updated game by game in `challenger_scores`
// order. The returned pair is the state after the arena. When the challenger
// is accepted it becomes the next incumbent with its rating.
TrainingElo training_elo_step(double incumbent_rating, std::span<const double> challenger_scores,
                              double k);
inline double next_incumbent_rating(const TrainingElo& e, bool accepted) {
  return accepted ? e.challenger : e.incumbent;
}

struct MatchRecord {
  int pair_index = 0;
  int round = 0;
  int game = 0;
  std::string player_a;  // moved first
  std::string player_b;
  double score_a = 0.0;  // 1, 0.5 or 0
  std::uint64_t seed = 0;
  int moves = 0;
};

struct RatedPlayer {
  std::string id;
  int games = 0;
  int wins = 0;
  int draws = 0;
  int losses = 0;
  double elo = 1000.0;
};

struct EloTable {
  std::vector<RatedPlayer> players;  // sorted by Elo, highest first
  int iterations = 0;

  double rating(const std::string& id) const;
};

struct MleOptions {
  // Virtual drawn games added between every pair that met at least once.
  double prior_draws = 1.0;
  double tolerance = 1e-6;  // Elo points
  int max_iterations = 1'000'000;
  double anchor = 1000.0;  // mean rating
};

// Minorization-maximization fit of the Bradley-Terry model. `players` lists
// ids that must appear in the table even without games. Throws ConfigError
// when the comparison graph is disconnected, naming the components.
EloTable fit_mle_elo(std::span<const MatchRecord> records, const std::vector<std::string>& players = {},
                     const MleOptions& options = {});

struct ScheduledGame {
  int pair_index = 0;
  int round = 0;
  int game = 0;
  int first = 0;   // index of the player moving first
  int second = 0;
  std::uint64_t seed = 0;
};

// Every unordered pair i < j, round-major. Within a pair, the k-th game
// (counted across rounds) has i moving first when k is even.
std::vector<ScheduledGame> schedule_round_robin(int players, int rounds, int games_per_pair,
                                                std::uint64_t seed);

// Plays the schedule; records come back in schedule order.
std::vector<MatchRecord> round_robin(const std::vector<std::shared_ptr<const Agent>>& agents,
                                     const GameSpec& spec, int rounds, int games_per_pair,
                                     std::uint64_t seed, int parallelism = 1);

void write_match_csv(std::ostream& out, std::span<const MatchRecord> records);
void write_rating_csv(std::ostream& out, const EloTable& table);

}  // namespace zs
