#pragma once

// Network-guided Monte Carlo tree search (PUCT selection).
//
// Each simulation descends from the root choosing
//   argmax_a  Q(s,a) + c * P(s,a) * sqrt(sum_b N(s,b)) / (1 + N(s,a))
// with Q = 0 for unvisited edges (and the prior alone when no edge of s has
// been visited), expands one leaf, evaluates it (network value, or the true
// outcome at terminal states) and backs the value up with the sign flipped
// at every ply. The root is expanded before the first simulation, so after
// m simulations the root edge visits sum to exactly m. Ties go to the lowest
// action index. A fresh tree is built for every call.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "zerosweep/errors.h"
#include "zerosweep/games.h"
#include "zerosweep/net.h"

namespace zs {

struct SearchConfig {
  int m = 100;     // simulations per move
  double c = 1.0;  // exploration constant C_p
  // When set, one JSON object per simulation: {"sim", "path", "leaf_value", "terminal"}.
  std::ostream* trace = nullptr;
};

struct Evaluation {
  std::vector<double> priors;  // over the full action space
  double value = 0.0;          // for the player to move
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual Evaluation evaluate(const GameState& state) const = 0;
};

// Uniform priors over legal actions and value 0.
class UniformEvaluator final : public Evaluator {
 public:
  Evaluation evaluate(const GameState& state) const override;
};

// Eval-mode network; illegal logits are masked before the softmax.
class NetworkEvaluator final : public Evaluator {
 public:
  explicit NetworkEvaluator(std::shared_ptr<const NetworkWeights> weights)
      : weights_(std::move(weights)) {}
  Evaluation evaluate(const GameState& state) const override;
  const NetworkWeights& weights() const { return *weights_; }

 private:
  std::shared_ptr<const NetworkWeights> weights_;
};

template <class E>
concept SearchEnvironment = requires(const E& env, const typename E::State& s, Action a) {
  { env.action_space_size() } -> std::convertible_to<int>;
  // Value for the player to move when s is terminal, nullopt otherwise.
  { env.terminal_value(s) } -> std::same_as<std::optional<double>>;
  { env.legal(s) } -> std::same_as<ActionMask>;
  { env.next(s, a) } -> std::same_as<typename E::State>;
  { env.evaluate(s) } -> std::same_as<Evaluation>;
};

struct SearchResult {
  std::vector<double> pi;   // N(root, a) / sum N
  std::vector<int> visits;  // N(root, a)
  std::vector<double> q;    // Q(root, a), 0 when unvisited
  std::vector<double> prior;
  double root_value = 0.0;  // mean backed-up value for the player to move at the root
  int simulations = 0;
};

template <SearchEnvironment Env>
SearchResult run_search(const Env& env, const typename Env::State& root,
                        const SearchConfig& config) {
  using State = typename Env::State;
  if (config.m < 1) throw std::invalid_argument("search needs m >= 1 simulations");
  if (!(config.c >= 0.0)) throw std::invalid_argument("exploration constant must be >= 0");
  if (env.terminal_value(root)) throw ContractViolation("search called on a terminal state");

  const int actions = env.action_space_size();
  struct Node {
    explicit Node(State s) : state(std::move(s)) {}
    State state;
    std::optional<double> terminal;
    bool expanded = false;
    ActionMask legal;
    std::vector<double> prior;
    std::vector<int> visits;
    std::vector<double> value_sum;
    std::vector<int> child;
    int total = 0;
  };
  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(config.m) + 1);

  auto make_node = [&](State s) {
    Node n(std::move(s));
    n.terminal = env.terminal_value(n.state);
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  };
  // Returns the network value for the player to move at the node.
  auto expand = [&](int id) {
    Node& n = nodes[id];
    n.legal = env.legal(n.state);
    Evaluation eval = env.evaluate(n.state);
    n.prior.assign(actions, 0.0);
    double sum = 0.0;
    int legal_count = 0;
    for (int a = 0; a < actions; ++a) {
      if (!n.legal[a]) continue;
      ++legal_count;
      n.prior[a] = std::max(0.0, eval.priors[a]);
      sum += n.prior[a];
    }
    for (int a = 0; a < actions; ++a) {
      if (!n.legal[a]) continue;
      n.prior[a] = sum > 0.0 ? n.prior[a] / sum : 1.0 / legal_count;
    }
    n.visits.assign(actions, 0);
    n.value_sum.assign(actions, 0.0);
    n.child.assign(actions, -1);
    n.expanded = true;
    return eval.value;
  };
  auto select = [&](const Node& n) {
    int best = -1;
    double best_score = -INFINITY;
    const double sqrt_total = std::sqrt(static_cast<double>(n.total));
    for (int a = 0; a < actions; ++a) {
      if (!n.legal[a]) continue;
      double score;
      if (n.total == 0) {
        score = n.prior[a];
      } else {
        const double q = n.visits[a] > 0 ? n.value_sum[a] / n.visits[a] : 0.0;
        score = q + config.c * n.prior[a] * sqrt_total / (1.0 + n.visits[a]);
      }
      if (score > best_score) {
        best_score = score;
        best = a;
      }
    }
    return best;
  };

  make_node(root);
  expand(0);

  std::vector<std::pair<int, int>> path;
  for (int sim = 0; sim < config.m; ++sim) {
    path.clear();
    int id = 0;
    double value = 0.0;
    bool hit_terminal = false;
    for (;;) {
      if (nodes[id].terminal) {
        value = *nodes[id].terminal;
        hit_terminal = true;
        break;
      }
      if (!nodes[id].expanded) {
        value = expand(id);
        break;
      }
      const int a = select(nodes[id]);
      path.emplace_back(id, a);
      if (nodes[id].child[a] < 0) {
        State next = env.next(nodes[id].state, a);
        const int child = make_node(std::move(next));
        nodes[id].child[a] = child;
      }
      id = nodes[id].child[a];
    }
    const double leaf_value = value;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      value = -value;
      Node& n = nodes[it->first];
      n.visits[it->second] += 1;
      n.value_sum[it->second] += value;
      n.total += 1;
    }
    if (config.trace) {
      std::ostream& os = *config.trace;
      os << "{\"sim\":" << sim << ",\"path\":[";
      for (std::size_t i = 0; i < path.size(); ++i) os << (i ? "," : "") << path[i].second;
      os << "],\"leaf_value\":" << leaf_value << ",\"terminal\":" << (hit_terminal ? "true" : "false")
         << "}\n";
    }
  }

  const Node& r = nodes[0];
  SearchResult result;
  result.simulations = config.m;
  result.visits = r.visits;
  result.prior = r.prior;
  result.pi.assign(actions, 0.0);
  result.q.assign(actions, 0.0);
  double w = 0.0;
  for (int a = 0; a < actions; ++a) {
    result.pi[a] = static_cast<double>(r.visits[a]) / r.total;
    if (r.visits[a] > 0) result.q[a] = r.value_sum[a] / r.visits[a];
    w += r.value_sum[a];
  }
  result.root_value = w / r.total;
  return result;
}

// Adapts the game engine and an evaluator to SearchEnvironment.
class GameEnv {
 public:
  using State = GameState;
  GameEnv(const GameSpec& spec, const Evaluator& evaluator)
      : actions_(spec.action_space_size()), evaluator_(evaluator) {}

  int action_space_size() const { return actions_; }
  std::optional<double> terminal_value(const GameState& s) const {
    const Outcome o = outcome(s);
    if (o == Outcome::kOngoing) return std::nullopt;
    return outcome_value(o, s.to_move());
  }
  ActionMask legal(const GameState& s) const { return legal_actions(s); }
  GameState next(const GameState& s, Action a) const { return apply(s, a); }
  Evaluation evaluate(const GameState& s) const { return evaluator_.evaluate(s); }

 private:
  int actions_;
  const Evaluator& evaluator_;
};

SearchResult run_search(const GameState& root, const Evaluator& evaluator,
                        const SearchConfig& config);

// The enhanced policy pi for `root`.
std::vector<double> search(const GameState& root, const NetworkWeights& weights,
                           const SearchConfig& config);

// Lowest index among the maxima.
Action argmax_action(std::span<const double> pi);

// step_index < t_prime: sample from pi; otherwise argmax.
Action select_action(std::span<const double> pi, int step_index, int t_prime,
                     std::mt19937_64& rng);

}  // namespace zs
