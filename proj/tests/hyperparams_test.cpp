#include "zerosweep/hyperparams.h"

#include <gtest/gtest.h>

#include <random>

#include "zerosweep/errors.h"
#include "zerosweep/util.h"

namespace zs {
namespace {

TEST(HyperParamsTest, DefaultsMatchTheDefaultTable) {
  const HyperParams p;
  const std::vector<std::pair<std::string, std::string>> expected{
      {"I", "100"}, {"E", "50"}, {"T_prime", "15"}, {"m", "100"}, {"c", "1"},   {"rs", "20"},
      {"ep", "10"}, {"bs", "64"}, {"lr", "0.005"},  {"d", "0.3"}, {"n", "40"}, {"u", "0.6"}};
  ASSERT_EQ(table1_parameters().size(), 12u);
  for (std::size_t k = 0; k < expected.size(); ++k) {
    EXPECT_EQ(table1_parameters()[k], expected[k].first);
    EXPECT_EQ(p.get(expected[k].first), expected[k].second) << expected[k].first;
  }
  EXPECT_EQ(p.get("loss_target"), "sum");
  EXPECT_TRUE(p.arena_enabled);
  EXPECT_TRUE(p.augment_symmetries);
  EXPECT_EQ(p.buffer_capacity(), 40);
  EXPECT_NO_THROW(p.validate());
}

TEST(HyperParamsTest, SetGetRoundTrip) {
  HyperParams p;
  p.set("m", "25");
  p.set("lr", "0.001");
  p.set("arena_enabled", "false");
  p.set("loss_target", "weighted(0.25)");
  EXPECT_EQ(p.m, 25);
  EXPECT_EQ(p.lr, 0.001);
  EXPECT_FALSE(p.arena_enabled);
  EXPECT_EQ(p.loss_target.kind, LossTarget::Kind::kWeightedSum);
  EXPECT_EQ(p.get("lambda"), "0.25");
  for (const auto& key : hyperparam_keys()) {
    HyperParams q;
    q.set(key, p.get(key));
    EXPECT_EQ(q.get(key), p.get(key)) << key;
  }
}

TEST(HyperParamsTest, BareWeightedKeepsLambda) {
  HyperParams p;
  p.set("lambda", "0.8");
  p.set("loss_target", "weighted");
  EXPECT_EQ(p.loss_target.kind, LossTarget::Kind::kWeightedSum);
  EXPECT_EQ(p.loss_target.lambda, 0.8);
}

TEST(HyperParamsTest, RejectsUnknownAndMalformed) {
  HyperParams p;
  EXPECT_THROW(p.set("foo", "1"), ConfigError);
  EXPECT_THROW(p.get("foo"), ConfigError);
  EXPECT_THROW(p.set("m", "ten"), ConfigError);
  EXPECT_THROW(p.set("m", "10x"), ConfigError);
  EXPECT_THROW(p.set("lr", ""), ConfigError);
  EXPECT_THROW(p.set("arena_enabled", "maybe"), ConfigError);
}

TEST(HyperParamsTest, ValidateBounds) {
  auto invalid = [](const char* key, const char* value) {
    HyperParams p;
    p.set(key, value);
    return [p] { p.validate(); };
  };
  EXPECT_THROW(invalid("I", "0")(), ConfigError);
  EXPECT_THROW(invalid("E", "0")(), ConfigError);
  EXPECT_THROW(invalid("T_prime", "-1")(), ConfigError);
  EXPECT_THROW(invalid("m", "0")(), ConfigError);
  EXPECT_THROW(invalid("rs", "0")(), ConfigError);
  EXPECT_THROW(invalid("u", "1.5")(), ConfigError);
  EXPECT_THROW(invalid("bs", "0")(), ConfigError);
  EXPECT_THROW(invalid("d", "1")(), ConfigError);
  EXPECT_NO_THROW(invalid("T_prime", "0")());
  EXPECT_NO_THROW(invalid("u", "1")());
}

TEST(HyperParamsTest, JsonRoundTrip) {
  HyperParams p;
  p.set("loss_target", "weighted(0.3)");
  p.set("c", "2");
  p.set("channels", "16");
  EXPECT_EQ(HyperParams::from_json(p.to_json()), p);
  EXPECT_THROW(HyperParams::from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
}

TEST(RunConfigTest, ParseTextAndOverrides) {
  const RunConfig c = RunConfig::parse(
      "# desk run\n"
      "game = othello\n"
      "size = 6\n"
      "\n"
      "I = 10   # short\n"
      "loss_target = product\n"
      "seed = 99\n");
  EXPECT_EQ(c.game, GameKind::kOthello);
  EXPECT_EQ(c.size, 6);
  EXPECT_EQ(c.params.I, 10);
  EXPECT_EQ(c.params.loss_target.kind, LossTarget::Kind::kProduct);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.params.E, 50);
  RunConfig d = c;
  d.apply_override("E=7");
  EXPECT_EQ(d.params.E, 7);
  EXPECT_THROW(d.apply_override("E"), ConfigError);
  EXPECT_THROW(d.apply_override("foo=1"), ConfigError);
}

TEST(RunConfigTest, ErrorsNameTheLine) {
  try {
    RunConfig::parse("I = 5\nm = 5\nwhat = 3\n", "desk.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("desk.cfg:3:", 0), 0u) << e.what();
  }
  EXPECT_THROW(RunConfig::parse("game = chess\n"), ConfigError);
  EXPECT_THROW(RunConfig::load("/nonexistent/run.cfg"), ConfigError);
}

TEST(RunConfigTest, JsonRoundTrip) {
  RunConfig c;
  c.game = GameKind::kGobang;
  c.size = 6;
  c.seed = 12345678901234ULL;
  c.output_dir = "out/x";
  c.parallelism = 3;
  c.params.set("lambda", "0.7");
  c.params.set("arena_enabled", "off");
  const RunConfig back = RunConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  EXPECT_EQ(back, c);
  EXPECT_THROW(RunConfig::from_json(nlohmann::json{{"game", "othello"}}), ConfigError);
}

TEST(RunConfigTest, TextRoundTripOnRandomConfigs) {
  std::mt19937_64 rng(7);
  const char* targets[] = {"policy_only", "value_only", "sum", "product", "weighted(0.25)"};
  for (int trial = 0; trial < 200; ++trial) {
    RunConfig c;
    c.game = static_cast<GameKind>(rng() % 3);
    c.size = 5 + static_cast<int>(rng() % 2);
    c.seed = rng();
    c.parallelism = 1 + static_cast<int>(rng() % 8);
    if (trial % 2) c.output_dir = "runs/t" + std::to_string(trial);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    c.params.I = 1 + static_cast<int>(rng() % 300);
    c.params.m = 1 + static_cast<int>(rng() % 400);
    c.params.c = 0.1 + 4 * unit(rng);
    c.params.lr = unit(rng) / 100;
    c.params.d = unit(rng) * 0.9;
    c.params.u = unit(rng);
    c.params.set("loss_target", targets[trial % 5]);
    if (trial % 5 == 4) c.params.set("lambda", format_double(unit(rng)));
    c.params.arena_enabled = trial % 3 != 0;
    c.params.augment_symmetries = trial % 4 != 0;
    EXPECT_EQ(RunConfig::parse(c.to_text()), c) << c.to_text();
  }
}

}  // namespace
}  // namespace zs
