#include "zerosweep/mcts.h"

namespace zs {

Evaluation UniformEvaluator::evaluate(const GameState& state) const {
  const ActionMask legal = legal_actions(state);
  Evaluation e;
  e.priors.assign(legal.size(), 0.0);
  int count = 0;
  for (auto l : legal) count += l ? 1 : 0;
  for (std::size_t a = 0; a < legal.size(); ++a) {
    if (legal[a]) e.priors[a] = 1.0 / count;
  }
  return e;
}

Evaluation NetworkEvaluator::evaluate(const GameState& state) const {
  const NetOutput out = forward(*weights_, encode(state), NetMode::kEval);
  return {masked_softmax(out.logits, legal_actions(state)), out.value};
}

SearchResult run_search(const GameState& root, const Evaluator& evaluator,
                        const SearchConfig& config) {
  return run_search(GameEnv(root.spec(), evaluator), root, config);
}

std::vector<double> search(const GameState& root, const NetworkWeights& weights,
                           const SearchConfig& config) {
  // Non-owning alias; the evaluator does not outlive this call.
  NetworkEvaluator evaluator(std::shared_ptr<const NetworkWeights>(&weights, [](auto*) {}));
  return run_search(root, evaluator, config).pi;
}

Action argmax_action(std::span<const double> pi) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(pi.size()); ++a) {
    if (pi[a] > pi[best]) best = a;
  }
  return best;
}

Action select_action(std::span<const double> pi, int step_index, int t_prime,
                     std::mt19937_64& rng) {
  if (step_index >= t_prime) return argmax_action(pi);
  std::discrete_distribution<int> dist(pi.begin(), pi.end());
  return dist(rng);
}

}  // namespace zs
