#pragma once

// Players for arenas, evaluation matches and tournaments. act() is const and
// safe to call from several threads at once.

#include <cstdint>
#include <memory>
#include <string>

#include "zerosweep/games.h"
#include "zerosweep/mcts.h"
#include "zerosweep/net.h"

namespace zs {

class Agent {
 public:
  explicit Agent(std::string id) : id_(std::move(id)) {}
  virtual ~Agent() = default;
  const std::string& id() const { return id_; }
  // `seed` is fixed per (game, ply) by the caller.
  virtual Action act(const GameState& state, std::uint64_t seed) const = 0;

 private:
  std::string id_;
};

// Uniform over legal actions.
class RandomAgent final : public Agent {
 public:
  using Agent::Agent;
  Action act(const GameState& state, std::uint64_t seed) const override;
};

// Search with the given evaluator and play argmax pi.
class MctsAgent final : public Agent {
 public:
  MctsAgent(std::string id, std::shared_ptr<const Evaluator> evaluator, SearchConfig config);
  MctsAgent(std::string id, std::shared_ptr<const NetworkWeights> weights, SearchConfig config);
  Action act(const GameState& state, std::uint64_t seed) const override;

 private:
  std::shared_ptr<const Evaluator> evaluator_;
  SearchConfig config_;
};

// Lowest legal action; a cheap stand-in when only the schedule matters.
class FirstLegalAgent final : public Agent {
 public:
  using Agent::Agent;
  Action act(const GameState& state, std::uint64_t seed) const override;
};

struct GameRecord {
  Outcome outcome = Outcome::kOngoing;
  int moves = 0;
};

// Plays one game to the end. The move at ply k uses derive_seed(seed, {k}).
GameRecord play_game(const GameSpec& spec, const Agent& p1, const Agent& p2, std::uint64_t seed);

}  // namespace zs
