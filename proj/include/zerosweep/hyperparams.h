#pragma once

// Hyper-parameters of one training run and the run configuration wrapped
// around them. Keys use the symbols of the default-setting table:
//   I E T_prime m c rs ep bs lr d n u
// plus loss_target, lambda, arena_enabled, augment_symmetries and the
// network sizes channels, fc1, fc2.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "zerosweep/games.h"
#include "zerosweep/mcts.h"
#include "zerosweep/net.h"

namespace zs {

struct HyperParams {
  int I = 100;
  int E = 50;
  int T_prime = 15;
  int m = 100;
  double c = 1.0;
  int rs = 20;
  int ep = 10;
  int bs = 64;
  double lr = 0.005;
  double d = 0.3;
  int n = 40;
  double u = 0.6;
  LossTarget loss_target{LossTarget::Kind::kSum, 0.5};
  bool arena_enabled = true;
  bool augment_symmetries = true;
  ArchConfig arch;
  double elo_k = 32.0;  // K-factor of the training Elo track

  // Throws ConfigError on an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  // JSON scalar form of set(): numbers, booleans or strings.
  void set_value(std::string_view key, const nlohmann::json& value);
  std::string get(std::string_view key) const;
  void validate() const;

  TrainConfig train_config() const { return {ep, bs, lr, d}; }
  SearchConfig search_config() const { return {m, c, nullptr}; }
  // Replay buffer capacity in iterations.
  int buffer_capacity() const { return rs > 40 ? rs : 40; }

  nlohmann::json to_json() const;
  static HyperParams from_json(const nlohmann::json& j);

  bool operator==(const HyperParams&) const = default;
};

// Every key accepted by HyperParams::set, in a stable order.
const std::vector<std::string>& hyperparam_keys();
// The twelve swept parameters, in table order.
const std::vector<std::string>& table1_parameters();

struct RunConfig {
  GameKind game = GameKind::kConnectFour;
  int size = 5;
  HyperParams params;
  std::uint64_t seed = 1;
  std::string output_dir;
  int parallelism = 1;

  GameSpec spec() const { return GameSpec(game, size); }

  // Accepts game, size, seed, output, parallelism and every hyper-parameter key.
  void set(std::string_view key, std::string_view value);
  // "key=value" override.
  void apply_override(std::string_view assignment);

  // Flat "key = value" text, '#' starts a comment. Errors name the line.
  static RunConfig parse(std::string_view text, const std::string& source = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  // The flat form accepted by parse(); parse(to_text()) == *this.
  std::string to_text() const;
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  bool operator==(const RunConfig&) const = default;
};

}  // namespace zs
