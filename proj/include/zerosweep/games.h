#pragma once

// Rule engines for Othello, Connect Four and Gobang on 5x5 and 6x6 boards.
//
// Boards are stored as two occupancy bitboards, one bit per cell at
// index row * size + col. Actions are integer indices:
//   Othello      cell index (row-major), pass = size * size
//   Connect Four column index
//   Gobang       cell index (row-major)
// Row 0 is the bottom row for Connect Four.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace zs {

enum class GameKind : std::uint8_t { kOthello = 0, kConnectFour = 1, kGobang = 2 };
enum class Player : std::uint8_t { kP1 = 1, kP2 = 2 };
enum class Cell : std::uint8_t { kEmpty = 0, kP1 = 1, kP2 = 2 };
enum class Outcome : std::uint8_t { kP1Wins, kP2Wins, kDraw, kOngoing };

using Action = int;
using ActionMask = std::vector<std::uint8_t>;

std::string_view to_string(GameKind kind);
std::string_view to_string(Outcome outcome);
// Accepts "othello", "connect4"/"connectfour", "gobang".
GameKind parse_game_kind(std::string_view name);

inline Player opponent(Player p) {
  return p == Player::kP1 ? Player::kP2 : Player::kP1;
}

class GameSpec {
 public:
  // Throws ConfigError unless board_size is 5 or 6.
  GameSpec(GameKind kind, int board_size);

  GameKind kind() const { return kind_; }
  int board_size() const { return size_; }
  int cells() const { return size_ * size_; }
  int action_space_size() const;
  // 4 for Connect Four and Gobang; Othello has no run condition (0).
  int win_length() const { return kind_ == GameKind::kOthello ? 0 : 4; }
  int pass_action() const { return cells(); }

  bool operator==(const GameSpec&) const = default;

 private:
  GameKind kind_;
  int size_;
};

// "othello_6", "connect4_5", ...
std::string spec_name(const GameSpec& spec);

class GameState {
 public:
  // Builds an arbitrary position (used by tests and oracles). Cells are
  // row-major, size * size entries. No reachability check is made.
  static GameState from_cells(const GameSpec& spec, std::span<const Cell> cells,
                              Player to_move, int ply = 0);

  const GameSpec& spec() const { return spec_; }
  Player to_move() const { return to_move_; }
  int ply() const { return ply_; }
  Cell at(int row, int col) const;
  std::uint64_t bits(Player p) const { return p == Player::kP1 ? p1_ : p2_; }
  std::vector<Cell> cells() const;
  int count(Player p) const;

  bool operator==(const GameState&) const = default;

 private:
  friend GameState initial_state(const GameSpec&);
  friend GameState apply(const GameState&, Action);
  friend GameState transform(const GameState&, int);

  explicit GameState(const GameSpec& spec) : spec_(spec) {}

  GameSpec spec_;
  std::uint64_t p1_ = 0;
  std::uint64_t p2_ = 0;
  Player to_move_ = Player::kP1;
  int ply_ = 0;
};

GameState initial_state(const GameSpec& spec);

// Precondition: outcome(state) == kOngoing, else ContractViolation.
ActionMask legal_actions(const GameState& state);

// Returns the successor; throws IllegalAction if the action is not legal.
GameState apply(const GameState& state, Action action);

Outcome outcome(const GameState& state);

// +1 if `perspective` won, -1 if lost, 0 for a draw or ongoing game.
double outcome_value(Outcome o, Player perspective);

// Three planes of size*size: P1 stones, P2 stones, side to move (all ones
// when P1 is to move, zeros otherwise).
inline constexpr int kInputPlanes = 3;
std::vector<double> encode(const GameState& state);

// Board symmetries. Othello and Gobang use the 8 dihedral transforms;
// Connect Four uses identity and the left-right mirror.
int symmetry_count(const GameSpec& spec);
int inverse_symmetry(const GameSpec& spec, int k);
GameState transform(const GameState& state, int k);
std::vector<double> transform_policy(const GameSpec& spec,
                                     std::span<const double> policy, int k);

struct SymmetricSample {
  GameState state;
  std::vector<double> policy;
};
// Returns every transform of (state, policy), identity first.
std::vector<SymmetricSample> symmetries(const GameState& state,
                                        std::span<const double> policy);

// One character per cell ('.', 'X' for P1, 'O' for P2), one row per line,
// highest row index first so Connect Four prints right side up.
std::string render(const GameState& state);

}  // namespace zs
