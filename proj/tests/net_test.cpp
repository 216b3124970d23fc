#include "zerosweep/net.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "zerosweep/checkpoint.h"
#include "zerosweep/errors.h"

namespace zs {
namespace {

const GameSpec kC4(GameKind::kConnectFour, 5);
const GameSpec kOthello6(GameKind::kOthello, 6);
const ArchConfig kSmall{8, 32, 16};

std::vector<double> random_input(const GameSpec& spec, std::mt19937_64& rng) {
  // Random legal-looking encoding: each cell empty, P1 or P2; side plane constant.
  std::vector<double> x(static_cast<std::size_t>(kInputPlanes) * spec.cells(), 0.0);
  std::uniform_int_distribution<int> cell(0, 2);
  for (int i = 0; i < spec.cells(); ++i) {
    const int v = cell(rng);
    if (v == 1) x[i] = 1.0;
    if (v == 2) x[spec.cells() + i] = 1.0;
  }
  const double side = std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
  for (int i = 0; i < spec.cells(); ++i) x[2 * spec.cells() + i] = side;
  return x;
}

std::vector<double> random_distribution(int n, std::mt19937_64& rng, int support = 0) {
  std::vector<double> pi(n, 0.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (support > 0) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < support; ++i) pi[idx[i]] = u(rng) + 0.01;
  } else {
    for (auto& v : pi) v = u(rng) + 0.01;
  }
  const double s = std::accumulate(pi.begin(), pi.end(), 0.0);
  for (auto& v : pi) v /= s;
  return pi;
}

TrainingExample random_example(const GameSpec& spec, std::mt19937_64& rng) {
  TrainingExample ex;
  ex.input = random_input(spec, rng);
  ex.policy = random_distribution(spec.action_space_size(), rng, 3);
  ex.z = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  return ex;
}

// ---- forward ---------------------------------------------------------------

TEST(ForwardTest, ZeroWeightsGiveUniformPolicyAndZeroValue) {
  const NetworkWeights w = NetworkWeights::zeros(kC4, ArchConfig{});
  std::mt19937_64 rng(1);
  for (NetMode mode : {NetMode::kEval, NetMode::kTrain}) {
    const NetOutput out = forward(w, random_input(kC4, rng), mode, 0.3, 5);
    for (double p : out.policy) EXPECT_DOUBLE_EQ(p, 1.0 / 5);
    EXPECT_EQ(out.value, 0.0);
  }
}

TEST(ForwardTest, EvalModeIsDeterministic) {
  const NetworkWeights w = NetworkWeights::random(kOthello6, ArchConfig{}, 3);
  std::mt19937_64 rng(2);
  const auto x = random_input(kOthello6, rng);
  const NetOutput a = forward(w, x, NetMode::kEval);
  const NetOutput b = forward(w, x, NetMode::kEval);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.value, b.value);
}

TEST(ForwardTest, TrainModeDropoutDependsOnSeed) {
  const NetworkWeights w = NetworkWeights::random(kC4, ArchConfig{}, 3);
  std::mt19937_64 rng(2);
  const auto x = random_input(kC4, rng);
  const NetOutput a = forward(w, x, NetMode::kTrain, 0.5, 1);
  const NetOutput b = forward(w, x, NetMode::kTrain, 0.5, 1);
  const NetOutput c = forward(w, x, NetMode::kTrain, 0.5, 2);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_NE(a.logits, c.logits);
}

TEST(ForwardTest, OutputInvariantsOnRandomWeights) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const GameSpec spec = trial % 2 ? kC4 : kOthello6;
    const NetworkWeights w = NetworkWeights::random(spec, kSmall, trial);
    const NetOutput out = forward(w, random_input(spec, rng), NetMode::kEval);
    ASSERT_EQ(static_cast<int>(out.policy.size()), spec.action_space_size());
    double sum = 0.0;
    for (double p : out.policy) {
      EXPECT_GE(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
    EXPECT_GE(out.value, -1.0);
    EXPECT_LE(out.value, 1.0);
  }
}

TEST(ForwardTest, BatchMatchesSingleInEvalMode) {
  const NetworkWeights w = NetworkWeights::random(kC4, kSmall, 4);
  std::mt19937_64 rng(3);
  std::vector<double> all;
  std::vector<std::vector<double>> singles;
  for (int i = 0; i < 5; ++i) {
    singles.push_back(random_input(kC4, rng));
    all.insert(all.end(), singles.back().begin(), singles.back().end());
  }
  const auto batch = forward_batch(w, all, 5);
  for (int i = 0; i < 5; ++i) {
    const NetOutput one = forward(w, singles[i], NetMode::kEval);
    for (std::size_t a = 0; a < one.logits.size(); ++a) {
      EXPECT_NEAR(batch[i].logits[a], one.logits[a], 1e-12);
    }
    EXPECT_NEAR(batch[i].value, one.value, 1e-12);
  }
}

TEST(ForwardTest, ShapeMismatchIsStructuredError) {
  const NetworkWeights w = NetworkWeights::random(kC4, kSmall, 1);
  const std::vector<double> bad(10, 0.0);
  EXPECT_THROW(forward(w, bad, NetMode::kEval), ShapeError);
}

TEST(WeightsTest, ShapesDependOnlyOnSpecAndArch) {
  const auto a = NetworkWeights::random(kOthello6, ArchConfig{}, 1);
  const auto b = NetworkWeights::random(kOthello6, ArchConfig{}, 2);
  ASSERT_EQ(a.arrays().size(), 28u);
  for (std::size_t i = 0; i < a.arrays().size(); ++i) {
    EXPECT_EQ(a.arrays()[i].name, b.arrays()[i].name);
    EXPECT_EQ(a.arrays()[i].shape, b.arrays()[i].shape);
  }
  EXPECT_EQ(a.array("conv1.weight").shape, (std::vector<int>{64, 3, 3, 3}));
  EXPECT_EQ(a.array("fc1.weight").shape, (std::vector<int>{256, 64 * 36}));
  EXPECT_EQ(a.array("policy.weight").shape, (std::vector<int>{37, 128}));
  EXPECT_TRUE(a.all_finite());
  EXPECT_EQ(a, NetworkWeights::random(kOthello6, ArchConfig{}, 1));
}

// ---- softmax and losses ----------------------------------------------------

TEST(SoftmaxTest, NormalizedAndShiftInvariant) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> logits(1 + trial % 40);
    for (auto& v : logits) v = normal(rng);
    const auto p = softmax(logits);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-6);
    const double shift = normal(rng) * 10;
    auto shifted = logits;
    for (auto& v : shifted) v += shift;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-6);
  }
}

TEST(SoftmaxTest, MaskedEntriesAreZero) {
  const std::vector<double> logits = {5.0, 1.0, 1.0, -2.0};
  const auto p = masked_softmax(logits, {0, 1, 1, 0});
  EXPECT_EQ(p[0], 0.0);
  EXPECT_EQ(p[3], 0.0);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(LossTest, UniformCrossEntropyIsLogK) {
  for (int k : {2, 5, 26, 37}) {
    const std::vector<double> logits(k, 0.3);
    const std::vector<double> pi(k, 1.0 / k);
    const LossBreakdown l = loss(logits, 0.0, pi, 0.0, {LossTarget::Kind::kPolicyOnly});
    EXPECT_NEAR(l.policy, std::log(static_cast<double>(k)), 1e-12);
  }
}

TEST(LossTest, ZeroValueErrorZeroesProduct) {
  const std::vector<double> logits = {1.0, 2.0, 3.0};
  const std::vector<double> pi = {0.2, 0.3, 0.5};
  const LossBreakdown l = loss(logits, 0.25, pi, 0.25, {LossTarget::Kind::kProduct});
  EXPECT_EQ(l.value, 0.0);
  EXPECT_EQ(l.total, 0.0);
}

TEST(LossTest, CombinationArithmetic) {
  EXPECT_NEAR(combine_losses(1.2, 0.5, {LossTarget::Kind::kSum}), 1.7, 1e-15);
  EXPECT_NEAR(combine_losses(1.2, 0.5, {LossTarget::Kind::kProduct}), 0.6, 1e-15);
  EXPECT_NEAR(combine_losses(1.2, 0.5, {LossTarget::Kind::kWeightedSum, 0.5}), 0.85, 1e-15);
  EXPECT_EQ(combine_losses(1.2, 0.5, {LossTarget::Kind::kPolicyOnly}), 1.2);
  EXPECT_EQ(combine_losses(1.2, 0.5, {LossTarget::Kind::kValueOnly}), 0.5);
}

TEST(LossTest, IdentitiesOnRandomTuples) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + trial % 36;
    std::vector<double> logits(k);
    for (auto& v : logits) v = normal(rng);
    const auto pi = random_distribution(k, rng, trial % 3 == 0 ? 1 + trial % k : 0);
    const double v = unit(rng), z = unit(rng);
    auto l = [&](LossTarget t) { return loss(logits, v, pi, z, t); };
    const LossBreakdown parts = l({LossTarget::Kind::kSum});
    EXPECT_NEAR(parts.total, parts.policy + parts.value, 1e-9);
    EXPECT_NEAR(l({LossTarget::Kind::kProduct}).total, parts.policy * parts.value, 1e-9);
    EXPECT_NEAR(l({LossTarget::Kind::kWeightedSum, 1.0}).total, l({LossTarget::Kind::kPolicyOnly}).total, 1e-9);
    EXPECT_NEAR(l({LossTarget::Kind::kWeightedSum, 0.0}).total, l({LossTarget::Kind::kValueOnly}).total, 1e-9);
    EXPECT_NEAR(parts.value, (v - z) * (v - z), 1e-12);
  }
}

TEST(LossTest, RejectsBadTargets) {
  const std::vector<double> logits = {0.0, 0.0};
  EXPECT_THROW(loss(logits, 0.0, std::vector<double>{0.6, 0.6}, 0.0, {}), std::invalid_argument);
  EXPECT_THROW(loss(logits, 0.0, std::vector<double>{1.5, -0.5}, 0.0, {}), std::invalid_argument);
  EXPECT_THROW(loss(logits, 0.0, std::vector<double>{0.5, 0.5}, 1.5, {}), std::invalid_argument);
}

TEST(LossTest, ProbabilityFloorKeepsLossFinite) {
  const std::vector<double> logits = {0.0, -5000.0};
  const LossBreakdown l = loss(logits, 0.0, std::vector<double>{0.0, 1.0}, 0.0, {});
  EXPECT_NEAR(l.policy, -std::log(kProbabilityFloor), 1e-9);
}

TEST(LossTargetTest, ParseRoundTrip) {
  for (const char* text : {"policy_only", "value_only", "sum", "product", "weighted(0.25)"}) {
    EXPECT_EQ(to_string(parse_loss_target(text)), text);
  }
  EXPECT_EQ(parse_loss_target("weighted").lambda, 0.5);
  EXPECT_THROW(parse_loss_target("weighted(2)"), ConfigError);
  EXPECT_THROW(parse_loss_target("l2"), ConfigError);
}

// ---- gradients -------------------------------------------------------------

class GradientCheckTest : public ::testing::TestWithParam<LossTarget> {};

TEST_P(GradientCheckTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  const NetworkWeights w = NetworkWeights::random(kC4, ArchConfig{}, 5);
  const TrainingExample ex = random_example(kC4, rng);
  for (BatchNormMode bn : {BatchNormMode::kRunningStats, BatchNormMode::kBatchStats}) {
    GradientCheckOptions opts;
    opts.batch_norm = bn;
    const GradientCheckResult r = gradient_check(w, ex, GetParam(), 1e-4, opts);
    EXPECT_GE(r.checked, 200);
    // Kinks are the exception, not the rule.
    EXPECT_LT(r.skipped_kinks, r.checked / 4);
    EXPECT_LT(r.max_relative_error, 1e-3)
        << to_string(GetParam()) << " skipped " << r.skipped_kinks << " worst " << r.worst_array << "[" << r.worst_index
        << "] analytic " << r.worst_analytic << " numeric " << r.worst_numeric;
  }
}

INSTANTIATE_TEST_SUITE_P(
    Targets, GradientCheckTest,
    ::testing::Values(LossTarget{LossTarget::Kind::kPolicyOnly}, LossTarget{LossTarget::Kind::kValueOnly},
                      LossTarget{LossTarget::Kind::kSum}, LossTarget{LossTarget::Kind::kProduct},
                      LossTarget{LossTarget::Kind::kWeightedSum, 0.3}),
    [](const auto& info) {
      std::string s = to_string(info.param);
      return s.starts_with("weighted") ? std::string("weighted") : s;
    });

TEST(GradientTest, ValueOnlyAtExactTargetIsStationary) {
  std::mt19937_64 rng(2);
  const NetworkWeights w = NetworkWeights::random(kC4, kSmall, 3);
  TrainingExample ex = random_example(kC4, rng);
  ex.z = forward(w, ex.input, NetMode::kEval).value;
  const TrainingExample* batch[1] = {&ex};
  Gradients g;
  const LossBreakdown l = loss_and_gradients(w, batch, {LossTarget::Kind::kValueOnly},
                                             {BatchNormMode::kRunningStats, 0.0, 0}, &g);
  EXPECT_EQ(l.total, 0.0);
  for (const auto& grad : g) {
    for (double v : grad) EXPECT_EQ(v, 0.0);
  }
}

// ---- training --------------------------------------------------------------

// Adam's first step moves every weight by about lr, so with ~4e5 parameters
// lr = 1e-3 is not a small step; 1e-4 is.
TEST(TrainTest, SingleStepDoesNotIncreaseLoss) {
  std::mt19937_64 rng(30);
  const TrainConfig config{1, 1, 1e-4, 0.0};
  for (int trial = 0; trial < 10; ++trial) {
    const NetworkWeights w = NetworkWeights::random(kC4, ArchConfig{}, trial);
    const std::vector<TrainingExample> ex = {random_example(kC4, rng)};
    const TrainingExample* batch[1] = {&ex[0]};
    const PassOptions opts{BatchNormMode::kBatchStats, 0.0, 0};
    const double before = loss_and_gradients(w, batch, {}, opts, nullptr).total;
    const TrainResult r = train_epochs(w, ex, config, {}, 1);
    ASSERT_EQ(r.epoch_losses.size(), 1u);
    EXPECT_NEAR(r.epoch_losses[0].total, before, 1e-12);
    const double after = loss_and_gradients(r.weights, batch, {}, opts, nullptr).total;
    EXPECT_LE(after, before);
  }
}

TEST(TrainTest, ZeroLearningRateLeavesTrainableWeightsUnchanged) {
  std::mt19937_64 rng(31);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 10; ++i) ex.push_back(random_example(kC4, rng));
  const NetworkWeights w = NetworkWeights::random(kC4, kSmall, 1);
  const TrainResult r = train_epochs(w, ex, TrainConfig{3, 4, 0.0, 0.3}, {}, 2);
  EXPECT_EQ(r.epoch_losses.size(), 3u);
  for (std::size_t i = 0; i < w.arrays().size(); ++i) {
    if (w.arrays()[i].trainable) {
      EXPECT_EQ(r.weights.arrays()[i], w.arrays()[i]);
    }
  }
}

TEST(TrainTest, RejectsEmptyExamplesAndBadConfig) {
  const NetworkWeights w = NetworkWeights::random(kC4, kSmall, 1);
  EXPECT_THROW(train_epochs(w, std::vector<TrainingExample>{}, {}, {}, 1), std::invalid_argument);
  std::mt19937_64 rng(1);
  const std::vector<TrainingExample> ex = {random_example(kC4, rng)};
  EXPECT_THROW(train_epochs(w, ex, TrainConfig{0, 1, 0.1, 0.0}, {}, 1), ConfigError);
  EXPECT_THROW(train_epochs(w, ex, TrainConfig{1, 1, 0.1, 1.0}, {}, 1), ConfigError);
}

TEST(TrainTest, SameSeedGivesBitIdenticalWeights) {
  std::mt19937_64 rng(32);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 40; ++i) ex.push_back(random_example(kOthello6, rng));
  const NetworkWeights w = NetworkWeights::random(kOthello6, kSmall, 9);
  const TrainConfig config{3, 16, 5e-3, 0.3};
  const TrainResult a = train_epochs(w, ex, config, {}, 77);
  const TrainResult b = train_epochs(w, ex, config, {}, 77);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_TRUE(a.weights.all_finite());
  const TrainResult c = train_epochs(w, ex, config, {}, 78);
  EXPECT_NE(a.weights, c.weights);
}

TEST(TrainTest, LossTrendsDownOverEpochs) {
  std::mt19937_64 rng(33);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 64; ++i) ex.push_back(random_example(kC4, rng));
  const TrainResult r =
      train_epochs(NetworkWeights::random(kC4, ArchConfig{}, 2), ex, TrainConfig{5, 16, 1e-3, 0.0}, {}, 3);
  ASSERT_EQ(r.epoch_losses.size(), 5u);
  EXPECT_LT(r.epoch_losses.back().total, r.epoch_losses.front().total);
}

TEST(TrainTest, OverfitsThirtyTwoExamples) {
  std::mt19937_64 rng(34);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 32; ++i) {
    TrainingExample e;
    e.input = random_input(kC4, rng);
    e.policy.assign(5, 0.0);
    e.policy[std::uniform_int_distribution<int>(0, 4)(rng)] = 1.0;
    e.z = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
    ex.push_back(std::move(e));
  }
  NetworkWeights w = NetworkWeights::random(kC4, ArchConfig{}, 4);
  double last = INFINITY;
  int epochs = 0;
  // Chunks of 25 epochs with fresh optimizer state each call.
  while (epochs < 500 && last >= 0.1) {
    TrainResult r = train_epochs(std::move(w), ex, TrainConfig{25, 32, 2e-3, 0.0}, {}, epochs);
    w = std::move(r.weights);
    epochs += 25;
    const TrainingExample* all[32];
    for (int i = 0; i < 32; ++i) all[i] = &ex[i];
    last = loss_and_gradients(w, all, {}, {BatchNormMode::kBatchStats, 0.0, 0}, nullptr).total;
  }
  EXPECT_LT(last, 0.1) << "after " << epochs << " epochs";
}

// ---- checkpoints -------------------------------------------------------------

TEST(CheckpointTest, RoundTripIsBitIdentical) {
  const NetworkWeights w = NetworkWeights::random(kOthello6, ArchConfig{}, 11);
  const CheckpointMetadata meta{7, "product", {{"m", 100}, {"lr", 0.005}}};
  const auto bytes = save_checkpoint(w, meta);
  const LoadedCheckpoint back = load_checkpoint(bytes, kOthello6);
  EXPECT_EQ(back.weights, w);
  EXPECT_EQ(back.metadata, meta);
  EXPECT_EQ(save_checkpoint(back.weights, back.metadata), bytes);
}

TEST(CheckpointTest, RoundTripAfterTraining) {
  std::mt19937_64 rng(3);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 8; ++i) ex.push_back(random_example(kC4, rng));
  const NetworkWeights w =
      train_epochs(NetworkWeights::random(kC4, kSmall, 1), ex, TrainConfig{2, 4, 1e-2, 0.2}, {}, 5).weights;
  EXPECT_EQ(load_checkpoint(save_checkpoint(w, {})).weights, w);
}

TEST(CheckpointTest, DistinctErrors) {
  const NetworkWeights w = NetworkWeights::random(kOthello6, kSmall, 1);
  const auto bytes = save_checkpoint(w, {});
  auto code_of = [](const std::vector<std::uint8_t>& b, std::optional<GameSpec> spec = std::nullopt) {
    try {
      load_checkpoint(b, spec);
    } catch (const CheckpointError& e) {
      return e.code();
    }
    ADD_FAILURE() << "expected a CheckpointError";
    return CheckpointError::Code::kIo;
  };
  using Code = CheckpointError::Code;
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_EQ(code_of({bytes.begin(), bytes.begin() + cut}), Code::kTruncated);
  }
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of(bad_magic), Code::kBadMagic);
  auto bad_version = bytes;
  bad_version[4] = 99;
  EXPECT_EQ(code_of(bad_version), Code::kVersionMismatch);
  EXPECT_EQ(code_of(bytes, kC4), Code::kShapeMismatch);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(code_of(trailing), Code::kCorrupt);
}

TEST(CheckpointTest, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "zs_ckpt_test";
  std::filesystem::create_directories(dir);
  const NetworkWeights w = NetworkWeights::random(kC4, kSmall, 2);
  save_checkpoint_file(dir / "a.ckpt", w, {3, "sum", {}});
  const auto back = load_checkpoint_file(dir / "a.ckpt");
  EXPECT_EQ(back.weights, w);
  EXPECT_EQ(back.metadata.iteration, 3);
  EXPECT_THROW(load_checkpoint_file(dir / "missing.ckpt"), CheckpointError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace zs
