#include "zerosweep/mcts.h"

#include <gtest/gtest.h>

#include <functional>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "support/positions.h"

namespace zs {
namespace {

// A synthetic game tree: `branching` moves per ply, terminal after `depth`
// plies. State is the move path.
struct ToyEnv {
  using State = std::vector<int>;
  int branching = 2;
  int depth = 2;
  // Value for the player to move at a terminal path.
  std::function<double(const State&)> leaf;
  std::function<Evaluation(const State&)> eval;

  int action_space_size() const { return branching; }
  std::optional<double> terminal_value(const State& s) const {
    if (static_cast<int>(s.size()) < depth) return std::nullopt;
    return leaf(s);
  }
  ActionMask legal(const State&) const { return ActionMask(branching, 1); }
  State next(const State& s, Action a) const {
    State t = s;
    t.push_back(a);
    return t;
  }
  Evaluation evaluate(const State& s) const { return eval(s); }
};
static_assert(SearchEnvironment<ToyEnv>);
static_assert(SearchEnvironment<GameEnv>);

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

TEST(SearchTest, ForcedMoveGetsAllMass) {
  // Connect Four with only column 3 open; paired rows so no line forms.
  std::vector<Cell> cells(25, Cell::kEmpty);
  for (int r = 0; r < 5; ++r) {
    for (int c : {0, 1, 2, 4}) cells[r * 5 + c] = (r / 2 + c) % 2 ? Cell::kP1 : Cell::kP2;
  }
  const GameState s = GameState::from_cells(GameSpec(GameKind::kConnectFour, 5), cells, Player::kP1);
  ASSERT_EQ(outcome(s), Outcome::kOngoing);
  const ActionMask legal = legal_actions(s);
  ASSERT_EQ(std::count(legal.begin(), legal.end(), 1), 1);
  const UniformEvaluator uniform;
  const SearchResult r = run_search(s, uniform, {10, 1.0});
  EXPECT_EQ(r.pi[3], 1.0);
}

TEST(SearchTest, OthelloPassOnlyPosition) {
  std::vector<Cell> cells(25, Cell::kEmpty);
  cells[0] = Cell::kP2;
  cells[1] = Cell::kP1;
  const GameState s = GameState::from_cells(GameSpec(GameKind::kOthello, 5), cells, Player::kP1);
  const auto pi = search(s, NetworkWeights::zeros(s.spec(), ArchConfig{8, 16, 8}), {5, 1.0});
  EXPECT_EQ(pi[25], 1.0);
}

TEST(SearchTest, ConnectFourImmediateWinGetsMostMass) {
  GameState s = initial_state(GameSpec(GameKind::kConnectFour, 5));
  for (int col : {0, 4, 1, 4, 2}) s = apply(s, col);  // P2 to move; P1 threatens column 3
  s = apply(s, 4);
  // P1 to move: column 3 completes the bottom row.
  ASSERT_EQ(testing::immediate_wins(s), std::vector<Action>{3});
  const UniformEvaluator uniform;
  const SearchResult r = run_search(s, uniform, {200, 1.0});
  EXPECT_EQ(argmax_action(r.pi), 3);
}

TEST(SearchTest, ZeroNetworkVisitsEveryOthelloOpening) {
  const GameState s = initial_state(GameSpec(GameKind::kOthello, 6));
  const auto pi = search(s, NetworkWeights::zeros(s.spec(), ArchConfig{}), {25, 1.0});
  const ActionMask legal = legal_actions(s);
  for (std::size_t a = 0; a < pi.size(); ++a) {
    if (legal[a]) {
      EXPECT_GT(pi[a], 0.0) << a;
    } else {
      EXPECT_EQ(pi[a], 0.0) << a;
    }
  }
}

TEST(SearchTest, ConservationLegalityAndDeterminism) {
  std::mt19937_64 rng(3);
  const NetworkWeights w = NetworkWeights::random(GameSpec(GameKind::kGobang, 5), ArchConfig{8, 16, 8}, 1);
  const NetworkEvaluator net(std::make_shared<NetworkWeights>(w));
  for (GameKind kind : {GameKind::kOthello, GameKind::kConnectFour, GameKind::kGobang}) {
    const GameSpec spec(kind, 5);
    const UniformEvaluator uniform;
    GameState s = initial_state(spec);
    for (int ply = 0; ply < 8 && outcome(s) == Outcome::kOngoing; ++ply) {
      for (int m : {1, 7, 50}) {
        const SearchResult r = kind == GameKind::kGobang ? run_search(s, net, {m, 1.5})
                                                         : run_search(s, uniform, {m, 1.5});
        EXPECT_EQ(std::accumulate(r.visits.begin(), r.visits.end(), 0), m);
        EXPECT_NEAR(sum(r.pi), 1.0, 1e-6);
        const ActionMask legal = legal_actions(s);
        for (std::size_t a = 0; a < legal.size(); ++a) {
          if (!legal[a]) {
            EXPECT_EQ(r.pi[a], 0.0);
          }
        }
        EXPECT_NEAR(sum(r.prior), 1.0, 1e-6);
        const SearchResult again = kind == GameKind::kGobang ? run_search(s, net, {m, 1.5})
                                                             : run_search(s, uniform, {m, 1.5});
        EXPECT_EQ(r.pi, again.pi);
      }
      const ActionMask legal = legal_actions(s);
      std::vector<Action> acts;
      for (int a = 0; a < static_cast<int>(legal.size()); ++a) {
        if (legal[a]) acts.push_back(a);
      }
      s = apply(s, acts[rng() % acts.size()]);
    }
  }
}

TEST(SearchTest, RejectsBadInputs) {
  const UniformEvaluator uniform;
  const GameState s = initial_state(GameSpec(GameKind::kGobang, 5));
  EXPECT_THROW(run_search(s, uniform, {0, 1.0}), std::invalid_argument);
  EXPECT_THROW(run_search(s, uniform, {10, -1.0}), std::invalid_argument);
  std::vector<Cell> cells(25, Cell::kEmpty);
  for (int c = 0; c < 4; ++c) cells[c] = Cell::kP1;
  const GameState done = GameState::from_cells(s.spec(), cells, Player::kP2);
  EXPECT_THROW(run_search(done, uniform, {10, 1.0}), ContractViolation);
}

TEST(SearchTest, TwoPlyAllWinsGivesRootValueOne) {
  ToyEnv env;
  env.branching = 3;
  env.depth = 2;
  env.leaf = [](const ToyEnv::State&) { return 1.0; };  // P1 to move at depth 2 has won
  // Exact values: the side to move at depth 1 (P2) is lost.
  env.eval = [&](const ToyEnv::State& s) {
    return Evaluation{std::vector<double>(3, 1.0 / 3), s.size() == 1 ? -1.0 : 0.0};
  };
  for (int m : {10, 25, 100}) {
    const SearchResult r = run_search(env, ToyEnv::State{}, {m, 1.0});
    EXPECT_NEAR(r.root_value, 1.0, 1e-6);
    for (int a = 0; a < 3; ++a) {
      if (r.visits[a] > 0) {
        EXPECT_NEAR(r.q[a], 1.0, 1e-12);
      }
    }
  }
}

TEST(SearchTest, SignAlternatesThroughThreePlies) {
  // Leaves are wins for the player who made the last move (P1 after 3 plies).
  ToyEnv env;
  env.branching = 2;
  env.depth = 3;
  env.leaf = [](const ToyEnv::State&) { return -1.0; };
  env.eval = [](const ToyEnv::State&) { return Evaluation{{0.5, 0.5}, 0.0}; };
  const SearchResult r = run_search(env, ToyEnv::State{}, {400, 1.0});
  EXPECT_GT(r.root_value, 0.5);
}

TEST(SearchTest, GreedyRootPrefersBestChild) {
  ToyEnv env;
  env.branching = 4;
  env.depth = 3;
  env.leaf = [](const ToyEnv::State&) { return 0.0; };
  env.eval = [](const ToyEnv::State& s) {
    Evaluation e{{0.1, 0.1, 0.7, 0.1}, 0.0};
    // Child 2 of the root looks best for the root player.
    if (s.size() == 1) e.value = s[0] == 2 ? -0.9 : 0.1;
    return e;
  };
  const SearchResult r = run_search(env, ToyEnv::State{}, {60, 0.0});
  for (int a = 0; a < 4; ++a) EXPECT_GE(r.visits[2], r.visits[a]);
}

TEST(SearchTest, TiesGoToLowestIndex) {
  ToyEnv env;
  env.branching = 3;
  env.depth = 2;
  env.leaf = [](const ToyEnv::State&) { return 0.0; };
  env.eval = [](const ToyEnv::State&) { return Evaluation{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.0}; };
  const SearchResult r = run_search(env, ToyEnv::State{}, {1, 1.0});
  EXPECT_EQ(r.visits, (std::vector<int>{1, 0, 0}));
}

TEST(SearchTest, TraceHasOneLinePerSimulation) {
  std::ostringstream trace;
  SearchConfig config{12, 1.0, &trace};
  const UniformEvaluator uniform;
  run_search(initial_state(GameSpec(GameKind::kConnectFour, 5)), uniform, config);
  std::istringstream in(trace.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("sim").get<int>(), lines);
    EXPECT_TRUE(j.contains("path"));
    EXPECT_TRUE(j.contains("leaf_value"));
    ++lines;
  }
  EXPECT_EQ(lines, 12);
}

TEST(SearchTest, UniformSearchFindsGeneratedWins) {
  for (GameKind kind : {GameKind::kOthello, GameKind::kConnectFour, GameKind::kGobang}) {
    const GameSpec spec(kind, 6);
    const UniformEvaluator uniform;
    int found = 0;
    const auto positions = testing::win_in_one_positions(spec, 10, 17);
    for (const GameState& s : positions) {
      const auto wins = testing::immediate_wins(s);
      const Action best = argmax_action(run_search(s, uniform, {200, 1.0}).pi);
      found += std::find(wins.begin(), wins.end(), best) != wins.end();
    }
    EXPECT_GE(found, 9) << to_string(kind);
  }
}

TEST(SelectActionTest, Examples) {
  std::mt19937_64 rng(1);
  for (int step : {0, 5, 20}) EXPECT_EQ(select_action(std::vector<double>{0, 1, 0}, step, 10, rng), 1);
  EXPECT_EQ(select_action(std::vector<double>{0.4, 0.6}, 15, 15, rng), 1);
  EXPECT_EQ(select_action(std::vector<double>{0.5, 0.5}, 15, 15, rng), 0);
}

TEST(SelectActionTest, SamplingFrequencies) {
  std::mt19937_64 rng(2);
  int ones = 0;
  for (int i = 0; i < 10000; ++i) ones += select_action(std::vector<double>{0.5, 0.5}, 3, 15, rng);
  EXPECT_NEAR(ones / 10000.0, 0.5, 0.02);
}

}  // namespace
}  // namespace zs
