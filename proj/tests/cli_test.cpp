#include "cli.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "zerosweep/checkpoint.h"
#include "zerosweep/hyperparams.h"
#include "zerosweep/sweep.h"

namespace zs {
namespace {

namespace fs = std::filesystem;

fs::path fresh(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("zs_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  return line;
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args, const std::atomic<bool>* stop = nullptr) {
  args.insert(args.begin(), "zerosweep");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err, stop);
  return {code, out.str(), err.str()};
}

// A few seconds of training at most.
const std::vector<std::string> kTiny = {"--set", "E=2",  "--set", "m=4",       "--set", "n=2",
                                        "--set", "ep=2", "--set", "channels=8", "--set", "fc1=16",
                                        "--set", "fc2=8", "-q"};

std::vector<std::string> train_args(const fs::path& out, std::vector<std::string> extra) {
  std::vector<std::string> a = {"train", "--game", "connect4", "--size", "5", "--output", out.string()};
  a.insert(a.end(), kTiny.begin(), kTiny.end());
  a.insert(a.end(), extra.begin(), extra.end());
  return a;
}

void write_ckpt(const fs::path& p, GameKind kind, int size, std::uint64_t seed) {
  fs::create_directories(p.parent_path());
  CheckpointMetadata meta;
  meta.hyperparams = {{"m", 2}, {"c", 1.0}};
  save_checkpoint_file(p, NetworkWeights::random(GameSpec(kind, size), ArchConfig{4, 8, 4}, seed), meta);
}

TEST(CliTrain, WritesOneRecordPerIterationAndBothLosses) {
  const fs::path dir = fresh("train") / "run";
  const Result r = cli(train_args(dir, {"--set", "I=3", "--set", "loss_target=value_only"}));
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream f(dir / "metrics.jsonl");
  int lines = 0;
  for (std::string line; std::getline(f, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    for (const auto& e : j.at("epoch_losses")) {
      EXPECT_GT(e.at("policy").get<double>(), 0.0);
      EXPECT_DOUBLE_EQ(e.at("total").get<double>(), e.at("value").get<double>());
    }
  }
  EXPECT_EQ(lines, 3);
}

TEST(CliTrain, ManifestsReparseToTheSameConfig) {
  const fs::path dir = fresh("manifest") / "run";
  ASSERT_EQ(cli(train_args(dir, {"--set", "I=1", "--seed", "99", "--set", "loss_target=weighted(0.3)"})).code, 0);
  const RunConfig text = RunConfig::load(dir / "config.txt");
  const RunConfig json = RunConfig::from_json(nlohmann::json::parse(slurp(dir / "run.json")).at("config"));
  EXPECT_EQ(text, json);
  EXPECT_EQ(text.seed, 99u);
  EXPECT_EQ(text.params.I, 1);
  EXPECT_DOUBLE_EQ(text.params.loss_target.lambda, 0.3);
  EXPECT_EQ(RunConfig::parse(text.to_text()), text);
}

TEST(CliTrain, SameSeedSameBytes) {
  const fs::path root = fresh("determinism");
  ASSERT_EQ(cli(train_args(root / "a", {"--set", "I=2"})).code, 0);
  ASSERT_EQ(cli(train_args(root / "b", {"--set", "I=2"})).code, 0);
  EXPECT_EQ(slurp(root / "a" / "metrics.jsonl"), slurp(root / "b" / "metrics.jsonl"));
  EXPECT_FALSE(slurp(root / "a" / "metrics.jsonl").empty());
}

TEST(CliTrain, InvalidInputExitsTwo) {
  const fs::path dir = fresh("invalid");
  EXPECT_EQ(cli(train_args(dir / "a", {"--set", "foo=1"})).code, 2);
  EXPECT_EQ(cli(train_args(dir / "b", {"--set", "m=0"})).code, 2);
  EXPECT_EQ(cli({"train", "--game", "chess"}).code, 2);
  EXPECT_EQ(cli({"train", "--size", "7"}).code, 2);
  EXPECT_EQ(cli({"train", "--config", (dir / "missing.cfg").string()}).code, 2);
  EXPECT_EQ(cli({"train", "--bogus"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  std::ofstream(dir / "bad.cfg") << "game = connect4\nI = many\n";
  const Result r = cli({"train", "--config", (dir / "bad.cfg").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.cfg:2"), std::string::npos) << r.err;
}

TEST(CliTrain, InterruptThenResume) {
  const fs::path root = fresh("interrupt");
  std::atomic<bool> stop{true};
  const Result cut = cli(train_args(root / "cut", {"--set", "I=2"}), &stop);
  EXPECT_EQ(cut.code, 130);
  // The directory holds a run now; only --resume continues it.
  EXPECT_EQ(cli(train_args(root / "cut", {"--set", "I=2"})).code, 2);
  ASSERT_EQ(cli(train_args(root / "cut", {"--set", "I=2", "--resume"})).code, 0);
  ASSERT_EQ(cli(train_args(root / "whole", {"--set", "I=2"})).code, 0);
  EXPECT_EQ(slurp(root / "cut" / "metrics.jsonl"), slurp(root / "whole" / "metrics.jsonl"));
}

TEST(CliTrain, OutputRootFromEnvironment) {
  const fs::path root = fresh("env");
  ::setenv(cli::kOutputEnv, root.c_str(), 1);
  std::vector<std::string> args = {"train", "--game", "gobang", "--size", "6", "--seed", "5", "--set", "I=1"};
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  const Result r = cli(args);
  ::unsetenv(cli::kOutputEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root / "gobang_6_seed5" / "metrics.jsonl"));
}

TEST(CliSweep, PlanCounts) {
  const fs::path root = fresh("sweep_counts");
  Result r = cli({"sweep", "correlation", "--game", "othello", "--size", "6", "--dry-run", "--output",
                  (root / "c").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("= 81 runs scheduled"), std::string::npos) << r.out;
  EXPECT_EQ(nlohmann::json::parse(slurp(root / "c" / "sweep.json")).at("runs").size(), 81u);

  r = cli({"sweep", "table1", "--game", "othello", "--size", "6", "--desk-scale", "--dry-run",
           "--output", (root / "t").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("25 settings"), std::string::npos) << r.out;

  r = cli({"sweep", "loss_targets", "--size", "5", "--dry-run", "--output", (root / "l").string()});
  EXPECT_NE(r.out.find("4 settings x 8 seeds = 32 runs"), std::string::npos) << r.out;

  EXPECT_EQ(cli({"sweep", "nonsense", "--dry-run"}).code, 2);
  EXPECT_EQ(cli({"sweep", "correlation", "--desk-scale", "--dry-run"}).code, 2);
}

TEST(CliSweep, ResumeSkipsCompletedRuns) {
  const fs::path root = fresh("sweep_resume");
  SweepPlan plan;
  plan.name = "tiny";
  plan.base.I = 1;
  plan.base.E = 2;
  plan.base.m = 4;
  plan.base.ep = 2;
  plan.base.n = 2;
  plan.base.arch = ArchConfig{8, 16, 8};
  plan.axes = {{"m", {2, 4}}};
  std::ofstream(root / "plan.json") << plan.to_json().dump(2);
  const std::vector<std::string> args = {"sweep", (root / "plan.json").string(), "--output",
                                         (root / "s").string(), "-q"};
  ASSERT_EQ(cli(args).code, 0);
  const std::string results = slurp(root / "s" / "results.csv");
  const auto stamp = fs::last_write_time(root / "s" / "runs" / "run_0000_seed1" / "metrics.jsonl");
  const Result again = cli(args);
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_NE(again.out.find("2 runs complete, 0 failed"), std::string::npos) << again.out;
  EXPECT_EQ(fs::last_write_time(root / "s" / "runs" / "run_0000_seed1" / "metrics.jsonl"), stamp);
  EXPECT_EQ(slurp(root / "s" / "results.csv"), results);
}

TEST(CliTournament, NeedsOpponents) {
  const fs::path root = fresh("tour_single");
  write_ckpt(root / "only.ckpt", GameKind::kConnectFour, 5, 1);
  EXPECT_EQ(cli({"tournament", (root / "only.ckpt").string(), "--output", (root / "t").string()}).code, 2);
  const Result r = cli({"tournament", (root / "only.ckpt").string(), "--include-random", "--games-per-pair",
                        "2", "--output", (root / "t").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("2 rated players"), std::string::npos);
  EXPECT_EQ(cli({"tournament", (root / "nothing_here").string()}).code, 2);
}

TEST(CliTournament, IncompatibleCheckpointsAreListed) {
  const fs::path root = fresh("tour_mixed");
  write_ckpt(root / "a.ckpt", GameKind::kConnectFour, 5, 1);
  write_ckpt(root / "b.ckpt", GameKind::kConnectFour, 5, 2);
  write_ckpt(root / "c.ckpt", GameKind::kOthello, 6, 3);
  const Result r = cli({"tournament", root.string(), "--dry-run", "--output", (root / "t").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("c.ckpt (othello_6)"), std::string::npos) << r.err;
  EXPECT_EQ(r.err.find("a.ckpt"), std::string::npos) << r.err;
}

TEST(CliTournament, ScheduleArithmeticWithStubs) {
  const fs::path root = fresh("tour_counts");
  for (int k = 0; k < 81; ++k) {
    write_ckpt(root / "big" / ("p" + std::to_string(100 + k) + ".ckpt"), GameKind::kConnectFour, 5, k);
  }
  Result r = cli({"tournament", (root / "big").string(), "--include-random", "--rounds", "1",
                  "--games-per-pair", "10", "--dry-run", "--output", (root / "t82").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("82 players, 3321 pairs, 33210 games"), std::string::npos) << r.out;
  const auto manifest = nlohmann::json::parse(slurp(root / "t82" / "tournament.json"));
  EXPECT_EQ(manifest.at("games"), 33210);

  // 32 players by glob, plus random, 20 rounds of one game.
  r = cli({"tournament", (root / "big" / "p1[0-2]?.ckpt").string(),
           (root / "big" / "p13[01].ckpt").string(), "--include-random", "--rounds", "20",
           "--games-per-pair", "1", "--dry-run", "--output", (root / "t33").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("33 players, 528 pairs, 10560 games"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("33 rated players"), std::string::npos) << r.out;
  std::ifstream ratings(root / "t33" / "ratings.csv");
  int rows = 0;
  for (std::string line; std::getline(ratings, line);) ++rows;
  EXPECT_EQ(rows, 34);
}

TEST(CliArena, PlaysAgainstRandom) {
  const fs::path root = fresh("arena");
  write_ckpt(root / "a.ckpt", GameKind::kGobang, 5, 1);
  const Result r = cli({"arena", (root / "a.ckpt").string(), "random", "--games", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("wins").get<int>() + j.at("draws").get<int>() + j.at("losses").get<int>(), 4);
  EXPECT_EQ(cli({"arena", "random", "random"}).code, 2);
  std::ofstream(root / "junk.ckpt") << "not a checkpoint";
  EXPECT_EQ(cli({"arena", (root / "junk.ckpt").string(), "random"}).code, 2);
}

TEST(CliReport, TablesAndErrors) {
  const fs::path root = fresh("report");
  ASSERT_EQ(cli(train_args(root / "run", {"--set", "I=2"})).code, 0);
  Result r = cli({"report", (root / "run").string(), "--output", (root / "rep").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root / "rep" / "loss_vs_iteration.csv"));

  fs::create_directories(root / "empty");
  EXPECT_EQ(cli({"report", (root / "empty").string(), "--output", (root / "x").string()}).code, 2);

  fs::create_directories(root / "bad");
  std::ofstream(root / "bad" / "metrics.jsonl") << slurp(root / "run" / "metrics.jsonl") << "{oops\n";
  r = cli({"report", (root / "bad").string(), "--output", (root / "x").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("metrics.jsonl:3"), std::string::npos) << r.err;
}

// Header rows and column order are part of the file formats.
TEST(CliFormats, CsvHeadersMatchGolden) {
  const fs::path root = fresh("headers");
  SweepPlan plan;
  plan.name = "hdr";
  plan.base.I = 1;
  plan.base.E = 2;
  plan.base.m = 2;
  plan.base.ep = 1;
  plan.base.n = 2;
  plan.base.arch = ArchConfig{4, 8, 4};
  plan.axes = {{"m", {1, 3}}};
  std::ofstream(root / "plan.json") << plan.to_json().dump();
  ASSERT_EQ(cli({"sweep", (root / "plan.json").string(), "--output", (root / "s").string(), "-q"}).code, 0);
  ASSERT_EQ(cli({"tournament", (root / "s").string(), "--include-random", "--dry-run", "--games-per-pair", "1",
                 "--output", (root / "t").string()})
                .code,
            0);
  ASSERT_EQ(cli({"report", (root / "s").string(), "--ratings", (root / "t" / "ratings.csv").string(),
                 "--output", (root / "r").string()})
                .code,
            0);
  const std::vector<fs::path> files = {root / "s" / "results.csv",
                                       root / "t" / "matches.csv",
                                       root / "t" / "ratings.csv",
                                       root / "r" / "loss_vs_iteration.csv",
                                       root / "r" / "training_elo.csv",
                                       root / "r" / "elo_vs_time.csv",
                                       root / "r" / "time_table.csv"};
  std::ifstream golden(fs::path(ZS_GOLDEN_DIR) / "csv_headers.txt");
  ASSERT_TRUE(golden);
  for (const fs::path& f : files) {
    std::string line;
    ASSERT_TRUE(std::getline(golden, line));
    const auto colon = line.find(": ");
    EXPECT_EQ(line.substr(0, colon), f.filename().string());
    EXPECT_EQ(first_line(f), line.substr(colon + 2)) << f;
  }
  // Tournament ratings reach the report under the run ids.
  std::ifstream scatter(root / "r" / "elo_vs_time.csv");
  std::string line;
  std::getline(scatter, line);
  while (std::getline(scatter, line)) EXPECT_NE(line.find(",tournament,"), std::string::npos) << line;
}

}  // namespace
}  // namespace zs
