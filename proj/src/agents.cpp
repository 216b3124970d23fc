#include "zerosweep/agents.h"

#include <random>

#include "zerosweep/util.h"

namespace zs {

Action RandomAgent::act(const GameState& state, std::uint64_t seed) const {
  const ActionMask legal = legal_actions(state);
  std::vector<Action> actions;
  for (int a = 0; a < static_cast<int>(legal.size()); ++a) {
    if (legal[a]) actions.push_back(a);
  }
  std::mt19937_64 rng(seed);
  return actions[std::uniform_int_distribution<std::size_t>(0, actions.size() - 1)(rng)];
}

MctsAgent::MctsAgent(std::string id, std::shared_ptr<const Evaluator> evaluator,
                     SearchConfig config)
    : Agent(std::move(id)), evaluator_(std::move(evaluator)), config_(config) {
  config_.trace = nullptr;
}

MctsAgent::MctsAgent(std::string id, std::shared_ptr<const NetworkWeights> weights,
                     SearchConfig config)
    : MctsAgent(std::move(id), std::make_shared<NetworkEvaluator>(std::move(weights)), config) {}

Action MctsAgent::act(const GameState& state, std::uint64_t) const {
  return argmax_action(run_search(state, *evaluator_, config_).pi);
}

Action FirstLegalAgent::act(const GameState& state, std::uint64_t) const {
  const ActionMask legal = legal_actions(state);
  for (int a = 0; a < static_cast<int>(legal.size()); ++a) {
    if (legal[a]) return a;
  }
  throw ContractViolation("no legal action");
}

GameRecord play_game(const GameSpec& spec, const Agent& p1, const Agent& p2, std::uint64_t seed) {
  GameState s = initial_state(spec);
  GameRecord record;
  while (outcome(s) == Outcome::kOngoing) {
    const Agent& mover = s.to_move() == Player::kP1 ? p1 : p2;
    s = apply(s, mover.act(s, derive_seed(seed, {static_cast<std::uint64_t>(record.moves)})));
    ++record.moves;
  }
  record.outcome = outcome(s);
  return record;
}

}  // namespace zs
