#include "zerosweep/games.h"

#include <array>
#include <bit>
#include <cassert>

#include "zerosweep/errors.h"

namespace zs {
namespace {

struct BoardMasks {
  int size;
  std::uint64_t full;
  std::uint64_t not_first_col;
  std::uint64_t not_last_col;
  // Every window of 4 consecutive cells in the four line directions.
  std::vector<std::uint64_t> lines;
};

BoardMasks build_masks(int size) {
  BoardMasks m{};
  m.size = size;
  const int cells = size * size;
  m.full = (std::uint64_t{1} << cells) - 1;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const std::uint64_t bit = std::uint64_t{1} << (r * size + c);
      if (c != 0) m.not_first_col |= bit;
      if (c != size - 1) m.not_last_col |= bit;
    }
  }
  constexpr int kRun = 4;
  constexpr std::array<std::array<int, 2>, 4> dirs{{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      for (const auto& d : dirs) {
        const int er = r + d[0] * (kRun - 1);
        const int ec = c + d[1] * (kRun - 1);
        if (er < 0 || er >= size || ec < 0 || ec >= size) continue;
        std::uint64_t line = 0;
        for (int i = 0; i < kRun; ++i) {
          line |= std::uint64_t{1} << ((r + d[0] * i) * size + (c + d[1] * i));
        }
        m.lines.push_back(line);
      }
    }
  }
  return m;
}

const BoardMasks& masks_for(int size) {
  static const BoardMasks five = build_masks(5);
  static const BoardMasks six = build_masks(6);
  return size == 5 ? five : six;
}

constexpr std::array<std::array<int, 2>, 8> kDirections{
    {{0, 1}, {0, -1}, {1, 0}, {-1, 0}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};

inline std::uint64_t shift(std::uint64_t b, int dr, int dc, const BoardMasks& m) {
  if (dc == 1) {
    b &= m.not_last_col;
  } else if (dc == -1) {
    b &= m.not_first_col;
  }
  const int d = dr * m.size + dc;
  b = d > 0 ? b << d : b >> -d;
  return b & m.full;
}

std::uint64_t othello_moves(std::uint64_t own, std::uint64_t opp, const BoardMasks& m) {
  const std::uint64_t empty = ~(own | opp) & m.full;
  std::uint64_t moves = 0;
  for (const auto& d : kDirections) {
    std::uint64_t x = shift(own, d[0], d[1], m) & opp;
    for (int i = 0; i < m.size - 3; ++i) x |= shift(x, d[0], d[1], m) & opp;
    moves |= shift(x, d[0], d[1], m) & empty;
  }
  return moves;
}

std::uint64_t othello_flips(std::uint64_t own, std::uint64_t opp, std::uint64_t placed,
                            const BoardMasks& m) {
  std::uint64_t flips = 0;
  for (const auto& d : kDirections) {
    std::uint64_t run = 0;
    std::uint64_t y = shift(placed, d[0], d[1], m);
    while (y & opp) {
      run |= y;
      y = shift(y, d[0], d[1], m);
    }
    if (y & own) flips |= run;
  }
  return flips;
}

bool has_run(std::uint64_t stones, const BoardMasks& m) {
  for (std::uint64_t line : m.lines) {
    if ((stones & line) == line) return true;
  }
  return false;
}

int map_cell(int size, GameKind kind, int k, int index) {
  int r = index / size;
  int c = index % size;
  if (kind == GameKind::kConnectFour) {
    if (k == 1) c = size - 1 - c;
    return r * size + c;
  }
  if (k >= 4) c = size - 1 - c;
  for (int i = 0; i < k % 4; ++i) {
    const int nr = c;
    const int nc = size - 1 - r;
    r = nr;
    c = nc;
  }
  return r * size + c;
}

}  // namespace

std::string_view to_string(GameKind kind) {
  switch (kind) {
    case GameKind::kOthello: return "othello";
    case GameKind::kConnectFour: return "connect4";
    case GameKind::kGobang: return "gobang";
  }
  return "?";
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kP1Wins: return "p1_wins";
    case Outcome::kP2Wins: return "p2_wins";
    case Outcome::kDraw: return "draw";
    case Outcome::kOngoing: return "ongoing";
  }
  return "?";
}

GameKind parse_game_kind(std::string_view name) {
  if (name == "othello") return GameKind::kOthello;
  if (name == "connect4" || name == "connectfour") return GameKind::kConnectFour;
  if (name == "gobang") return GameKind::kGobang;
  throw ConfigError("unknown game '" + std::string(name) + "'");
}

GameSpec::GameSpec(GameKind kind, int board_size) : kind_(kind), size_(board_size) {
  if (board_size != 5 && board_size != 6) {
    throw ConfigError("board size must be 5 or 6, got " + std::to_string(board_size));
  }
  if (kind != GameKind::kOthello && kind != GameKind::kConnectFour &&
      kind != GameKind::kGobang) {
    throw ConfigError("unknown game kind");
  }
}

int GameSpec::action_space_size() const {
  switch (kind_) {
    case GameKind::kOthello: return cells() + 1;
    case GameKind::kConnectFour: return size_;
    case GameKind::kGobang: return cells();
  }
  return 0;
}

std::string spec_name(const GameSpec& spec) {
  return std::string(to_string(spec.kind())) + "_" + std::to_string(spec.board_size());
}

GameState GameState::from_cells(const GameSpec& spec, std::span<const Cell> cells,
                                Player to_move, int ply) {
  if (static_cast<int>(cells.size()) != spec.cells()) {
    throw ShapeError("expected " + std::to_string(spec.cells()) + " cells, got " +
                     std::to_string(cells.size()));
  }
  GameState s(spec);
  for (int i = 0; i < spec.cells(); ++i) {
    if (cells[i] == Cell::kP1) s.p1_ |= std::uint64_t{1} << i;
    if (cells[i] == Cell::kP2) s.p2_ |= std::uint64_t{1} << i;
  }
  s.to_move_ = to_move;
  s.ply_ = ply;
  return s;
}

Cell GameState::at(int row, int col) const {
  const std::uint64_t bit = std::uint64_t{1} << (row * spec_.board_size() + col);
  if (p1_ & bit) return Cell::kP1;
  if (p2_ & bit) return Cell::kP2;
  return Cell::kEmpty;
}

std::vector<Cell> GameState::cells() const {
  std::vector<Cell> out(spec_.cells(), Cell::kEmpty);
  for (int i = 0; i < spec_.cells(); ++i) {
    if ((p1_ >> i) & 1) out[i] = Cell::kP1;
    if ((p2_ >> i) & 1) out[i] = Cell::kP2;
  }
  return out;
}

int GameState::count(Player p) const { return std::popcount(bits(p)); }

GameState initial_state(const GameSpec& spec) {
  GameState s(spec);
  if (spec.kind() == GameKind::kOthello) {
    const int n = spec.board_size();
    const int h = n / 2;
    auto bit = [n](int r, int c) { return std::uint64_t{1} << (r * n + c); };
    s.p1_ = bit(h - 1, h) | bit(h, h - 1);
    s.p2_ = bit(h - 1, h - 1) | bit(h, h);
  }
  return s;
}

ActionMask legal_actions(const GameState& state) {
  const GameSpec& spec = state.spec();
  if (outcome(state) != Outcome::kOngoing) {
    throw ContractViolation("legal_actions called on a terminal state");
  }
  const BoardMasks& m = masks_for(spec.board_size());
  ActionMask mask(spec.action_space_size(), 0);
  const std::uint64_t own = state.bits(state.to_move());
  const std::uint64_t opp = state.bits(opponent(state.to_move()));
  const std::uint64_t empty = ~(own | opp) & m.full;
  switch (spec.kind()) {
    case GameKind::kOthello: {
      const std::uint64_t moves = othello_moves(own, opp, m);
      if (moves == 0) {
        mask[spec.pass_action()] = 1;
      } else {
        for (int i = 0; i < spec.cells(); ++i) mask[i] = (moves >> i) & 1;
      }
      break;
    }
    case GameKind::kConnectFour: {
      const int top = (spec.board_size() - 1) * spec.board_size();
      for (int c = 0; c < spec.board_size(); ++c) mask[c] = (empty >> (top + c)) & 1;
      break;
    }
    case GameKind::kGobang:
      for (int i = 0; i < spec.cells(); ++i) mask[i] = (empty >> i) & 1;
      break;
  }
  return mask;
}

GameState apply(const GameState& state, Action action) {
  const GameSpec& spec = state.spec();
  if (action < 0 || action >= spec.action_space_size()) {
    throw IllegalAction(action, "out of range for " + spec_name(spec));
  }
  if (outcome(state) != Outcome::kOngoing) {
    throw IllegalAction(action, "game is already over");
  }
  const BoardMasks& m = masks_for(spec.board_size());
  const Player mover = state.to_move();
  std::uint64_t own = state.bits(mover);
  std::uint64_t opp = state.bits(opponent(mover));
  const std::uint64_t empty = ~(own | opp) & m.full;

  switch (spec.kind()) {
    case GameKind::kOthello: {
      const std::uint64_t moves = othello_moves(own, opp, m);
      if (action == spec.pass_action()) {
        if (moves != 0) throw IllegalAction(action, "pass while a flipping placement exists");
        break;
      }
      const std::uint64_t placed = std::uint64_t{1} << action;
      if (!(moves & placed)) throw IllegalAction(action, "placement flips nothing or cell taken");
      const std::uint64_t flips = othello_flips(own, opp, placed, m);
      own |= placed | flips;
      opp &= ~flips;
      break;
    }
    case GameKind::kConnectFour: {
      int row = 0;
      const int n = spec.board_size();
      while (row < n && !((empty >> (row * n + action)) & 1)) ++row;
      if (row == n) throw IllegalAction(action, "column is full");
      own |= std::uint64_t{1} << (row * n + action);
      break;
    }
    case GameKind::kGobang: {
      const std::uint64_t placed = std::uint64_t{1} << action;
      if (!(empty & placed)) throw IllegalAction(action, "cell is occupied");
      own |= placed;
      break;
    }
  }

  GameState next = state;
  if (mover == Player::kP1) {
    next.p1_ = own;
    next.p2_ = opp;
  } else {
    next.p2_ = own;
    next.p1_ = opp;
  }
  next.to_move_ = opponent(mover);
  next.ply_ = state.ply_ + 1;
  return next;
}

Outcome outcome(const GameState& state) {
  const GameSpec& spec = state.spec();
  const BoardMasks& m = masks_for(spec.board_size());
  const std::uint64_t p1 = state.bits(Player::kP1);
  const std::uint64_t p2 = state.bits(Player::kP2);
  if (spec.kind() == GameKind::kOthello) {
    if (othello_moves(p1, p2, m) != 0 || othello_moves(p2, p1, m) != 0) {
      return Outcome::kOngoing;
    }
    const int c1 = std::popcount(p1);
    const int c2 = std::popcount(p2);
    if (c1 > c2) return Outcome::kP1Wins;
    if (c2 > c1) return Outcome::kP2Wins;
    return Outcome::kDraw;
  }
  if (has_run(p1, m)) return Outcome::kP1Wins;
  if (has_run(p2, m)) return Outcome::kP2Wins;
  if ((p1 | p2) == m.full) return Outcome::kDraw;
  return Outcome::kOngoing;
}

double outcome_value(Outcome o, Player perspective) {
  switch (o) {
    case Outcome::kP1Wins: return perspective == Player::kP1 ? 1.0 : -1.0;
    case Outcome::kP2Wins: return perspective == Player::kP2 ? 1.0 : -1.0;
    default: return 0.0;
  }
}

std::vector<double> encode(const GameState& state) {
  const int cells = state.spec().cells();
  std::vector<double> planes(static_cast<std::size_t>(kInputPlanes) * cells, 0.0);
  const std::uint64_t p1 = state.bits(Player::kP1);
  const std::uint64_t p2 = state.bits(Player::kP2);
  const double side = state.to_move() == Player::kP1 ? 1.0 : 0.0;
  for (int i = 0; i < cells; ++i) {
    planes[i] = static_cast<double>((p1 >> i) & 1);
    planes[cells + i] = static_cast<double>((p2 >> i) & 1);
    planes[2 * cells + i] = side;
  }
  return planes;
}

int symmetry_count(const GameSpec& spec) {
  return spec.kind() == GameKind::kConnectFour ? 2 : 8;
}

int inverse_symmetry(const GameSpec& spec, int k) {
  if (spec.kind() == GameKind::kConnectFour || k >= 4) return k;
  return (4 - k) % 4;
}

GameState transform(const GameState& state, int k) {
  const GameSpec& spec = state.spec();
  if (k < 0 || k >= symmetry_count(spec)) {
    throw std::out_of_range("symmetry index " + std::to_string(k));
  }
  GameState out = state;
  out.p1_ = 0;
  out.p2_ = 0;
  for (int i = 0; i < spec.cells(); ++i) {
    const std::uint64_t dst = std::uint64_t{1}
                              << map_cell(spec.board_size(), spec.kind(), k, i);
    if ((state.p1_ >> i) & 1) out.p1_ |= dst;
    if ((state.p2_ >> i) & 1) out.p2_ |= dst;
  }
  return out;
}

std::vector<double> transform_policy(const GameSpec& spec, std::span<const double> policy,
                                     int k) {
  if (static_cast<int>(policy.size()) != spec.action_space_size()) {
    throw ShapeError("policy length " + std::to_string(policy.size()) +
                     " != action space " + std::to_string(spec.action_space_size()));
  }
  std::vector<double> out(policy.size(), 0.0);
  const int n = spec.board_size();
  if (spec.kind() == GameKind::kConnectFour) {
    for (int c = 0; c < n; ++c) out[k == 1 ? n - 1 - c : c] = policy[c];
    return out;
  }
  for (int i = 0; i < spec.cells(); ++i) out[map_cell(n, spec.kind(), k, i)] = policy[i];
  if (spec.kind() == GameKind::kOthello) out[spec.pass_action()] = policy[spec.pass_action()];
  return out;
}

std::vector<SymmetricSample> symmetries(const GameState& state,
                                        std::span<const double> policy) {
  std::vector<SymmetricSample> out;
  const int count = symmetry_count(state.spec());
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    out.push_back({transform(state, k), transform_policy(state.spec(), policy, k)});
  }
  return out;
}

std::string render(const GameState& state) {
  const int n = state.spec().board_size();
  std::string out;
  out.reserve(static_cast<std::size_t>(n) * (n + 1));
  for (int r = n - 1; r >= 0; --r) {
    for (int c = 0; c < n; ++c) {
      switch (state.at(r, c)) {
        case Cell::kEmpty: out += '.'; break;
        case Cell::kP1: out += 'X'; break;
        case Cell::kP2: out += 'O'; break;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace zs
