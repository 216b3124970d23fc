#include "zerosweep/rating.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "zerosweep/errors.h"
#include "zerosweep/util.h"

namespace zs {

double expected_score(double r_a, double r_b) {
  return 1.0 / (1.0 + std::pow(10.0, (r_b - r_a) / 400.0));
}

double incremental_update(double r_a, double e_a, double s_a, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("K-factor must be > 0");
  return r_a + k * (s_a - e_a);
}

TrainingElo training_elo_step(double incumbent_rating, std::span<const double> challenger_scores,
                              double k) {
  TrainingElo e{incumbent_rating, incumbent_rating};
  for (double s : challenger_scores) {
    const double expect = expected_score(e.challenger, e.incumbent);
    e.challenger = incremental_update(e.challenger, expect, s, k);
    e.incumbent = incremental_update(e.incumbent, 1.0 - expect, 1.0 - s, k);
  }
  return e;
}

double EloTable::rating(const std::string& id) const {
  for (const RatedPlayer& p : players) {
    if (p.id == id) return p.elo;
  }
  throw std::out_of_range("no rating for '" + id + "'");
}

namespace {

// Players reachable from `start` along `adj`.
std::vector<bool> reachable(const std::vector<std::vector<bool>>& adj, int start) {
  const int n = static_cast<int>(adj.size());
  std::vector<bool> seen(n, false);
  std::vector<int> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < n; ++j) {
      if (adj[i][j] && !seen[j]) {
        seen[j] = true;
        stack.push_back(j);
      }
    }
  }
  return seen;
}

// Strongly connected components; with a symmetric `adj` these are the
// ordinary connected components.
std::vector<std::vector<int>> components(const std::vector<std::vector<bool>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<std::vector<bool>> reverse(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) reverse[j][i] = adj[i][j];
  }
  std::vector<int> label(n, -1);
  std::vector<std::vector<int>> out;
  for (int i = 0; i < n; ++i) {
    if (label[i] >= 0) continue;
    const auto fwd = reachable(adj, i);
    const auto back = reachable(reverse, i);
    out.emplace_back();
    for (int j = 0; j < n; ++j) {
      if (fwd[j] && back[j]) {
        label[j] = static_cast<int>(out.size()) - 1;
        out.back().push_back(j);
      }
    }
  }
  return out;
}

}  // namespace

EloTable fit_mle_elo(std::span<const MatchRecord> records, const std::vector<std::string>& players,
                     const MleOptions& options) {
  std::vector<std::string> ids = players;
  auto index_of = [&](const std::string& id) {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it != ids.end()) return static_cast<int>(it - ids.begin());
    ids.push_back(id);
    return static_cast<int>(ids.size()) - 1;
  };
  struct Game {
    int a, b;
    double score_a;
  };
  std::vector<Game> games;
  games.reserve(records.size());
  for (const MatchRecord& r : records) {
    if (r.player_a == r.player_b) throw ConfigError("match of '" + r.player_a + "' against itself");
    if (r.score_a != 0.0 && r.score_a != 0.5 && r.score_a != 1.0) {
      throw ConfigError("score must be 0, 0.5 or 1, got " + format_double(r.score_a));
    }
    const int a = index_of(r.player_a);
    games.push_back({a, index_of(r.player_b), r.score_a});
  }
  const int n = static_cast<int>(ids.size());
  EloTable table;
  table.players.resize(n);
  for (int i = 0; i < n; ++i) table.players[i].id = ids[i];
  if (n == 0) return table;

  // Pairwise game counts and scores, plus the smoothing prior.
  std::vector<std::vector<double>> count(n, std::vector<double>(n, 0.0));
  std::vector<double> score(n, 0.0);
  for (const Game& g : games) {
    count[g.a][g.b] += 1.0;
    count[g.b][g.a] += 1.0;
    score[g.a] += g.score_a;
    score[g.b] += 1.0 - g.score_a;
    RatedPlayer& pa = table.players[g.a];
    RatedPlayer& pb = table.players[g.b];
    ++pa.games;
    ++pb.games;
    if (g.score_a == 1.0) {
      ++pa.wins;
      ++pb.losses;
    } else if (g.score_a == 0.0) {
      ++pa.losses;
      ++pb.wins;
    } else {
      ++pa.draws;
      ++pb.draws;
    }
  }
  std::vector<std::vector<bool>> edge(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || count[i][j] == 0.0) continue;
      if (options.prior_draws > 0.0) edge[i][j] = true;
    }
  }
  if (options.prior_draws > 0.0) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (count[i][j] == 0.0) continue;
        count[i][j] += options.prior_draws;
        count[j][i] += options.prior_draws;
        score[i] += 0.5 * options.prior_draws;
        score[j] += 0.5 * options.prior_draws;
      }
    }
  } else {
    // Without a prior a finite maximum exists only when every player can be
    // reached from every other along "scored against" edges.
    for (const Game& g : games) {
      if (g.score_a > 0.0) edge[g.a][g.b] = true;
      if (g.score_a < 1.0) edge[g.b][g.a] = true;
    }
  }
  const auto parts = components(edge);
  if (parts.size() > 1) {
    std::string msg = "rating graph is disconnected:";
    for (const auto& part : parts) {
      msg += " {";
      for (std::size_t k = 0; k < part.size(); ++k) msg += (k ? ", " : "") + ids[part[k]];
      msg += "}";
    }
    throw ConfigError(msg);
  }

  std::vector<double> gamma(n, 1.0);
  std::vector<double> elo(n, 0.0);
  if (n > 1) {
    const double scale = 400.0 / std::log(10.0);
    int it = 0;
    for (; it < options.max_iterations; ++it) {
      std::vector<double> next(n);
      for (int i = 0; i < n; ++i) {
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
          if (j != i && count[i][j] > 0.0) denom += count[i][j] / (gamma[i] + gamma[j]);
        }
        next[i] = score[i] / denom;
      }
      // Geometric mean 1 keeps the scale fixed between steps.
      double log_mean = 0.0;
      for (double g : next) log_mean += std::log(g);
      log_mean /= n;
      double change = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e = scale * (std::log(next[i]) - log_mean);
        change = std::max(change, std::abs(e - elo[i]));
        elo[i] = e;
        gamma[i] = std::exp(e / scale);
      }
      if (change < options.tolerance) break;
    }
    if (it == options.max_iterations) throw NumericalError("rating fit did not converge");
    table.iterations = it + 1;
  }
  for (int i = 0; i < n; ++i) table.players[i].elo = options.anchor + elo[i];
  std::stable_sort(table.players.begin(), table.players.end(),
                   [](const RatedPlayer& x, const RatedPlayer& y) { return x.elo > y.elo; });
  return table;
}

std::vector<ScheduledGame> schedule_round_robin(int players, int rounds, int games_per_pair,
                                                std::uint64_t seed) {
  if (players < 2) throw ConfigError("a tournament needs at least 2 players");
  if (rounds < 1 || games_per_pair < 1) throw ConfigError("rounds and games per pair must be >= 1");
  const int pairs = players * (players - 1) / 2;
  std::vector<ScheduledGame> out;
  out.reserve(static_cast<std::size_t>(pairs) * rounds * games_per_pair);
  for (int round = 0; round < rounds; ++round) {
    int pair = 0;
    for (int i = 0; i < players; ++i) {
      for (int j = i + 1; j < players; ++j, ++pair) {
        for (int g = 0; g < games_per_pair; ++g) {
          const int k = round * games_per_pair + g;
          ScheduledGame s;
          s.pair_index = pair;
          s.round = round;
          s.game = g;
          s.first = k % 2 == 0 ? i : j;
          s.second = k % 2 == 0 ? j : i;
          s.seed = derive_seed(seed, {static_cast<std::uint64_t>(pair),
                                      static_cast<std::uint64_t>(round),
                                      static_cast<std::uint64_t>(g)});
          out.push_back(s);
        }
      }
    }
  }
  return out;
}

std::vector<MatchRecord> round_robin(const std::vector<std::shared_ptr<const Agent>>& agents,
                                     const GameSpec& spec, int rounds, int games_per_pair,
                                     std::uint64_t seed, int parallelism) {
  const auto schedule =
      schedule_round_robin(static_cast<int>(agents.size()), rounds, games_per_pair, seed);
  std::vector<MatchRecord> records(schedule.size());
  const long total = static_cast<long>(schedule.size());
  parallel_for(total, parallelism, [&](long k) {
    const ScheduledGame& s = schedule[k];
    const Agent& first = *agents[s.first];
    const Agent& second = *agents[s.second];
    const GameRecord g = play_game(spec, first, second, s.seed);
    MatchRecord& r = records[k];
    r.pair_index = s.pair_index;
    r.round = s.round;
    r.game = s.game;
    r.player_a = first.id();
    r.player_b = second.id();
    r.score_a = 0.5 * (outcome_value(g.outcome, Player::kP1) + 1.0);
    r.seed = s.seed;
    r.moves = g.moves;
  });
  return records;
}

void write_match_csv(std::ostream& out, std::span<const MatchRecord> records) {
  out << "pair_index,round,game,player_a,player_b,score_a,seed\n";
  for (const MatchRecord& r : records) {
    out << r.pair_index << ',' << r.round << ',' << r.game << ',' << r.player_a << ','
        << r.player_b << ',' << format_double(r.score_a) << ',' << r.seed << '\n';
  }
}

void write_rating_csv(std::ostream& out, const EloTable& table) {
  out << "player,games,wins,draws,losses,elo\n";
  for (const RatedPlayer& p : table.players) {
    out << p.id << ',' << p.games << ',' << p.wins << ',' << p.draws << ',' << p.losses << ','
        << format_double(p.elo) << '\n';
  }
}

}  // namespace zs
