#pragma once

// Policy-value network: 4 conv layers (3x3, batch norm, ReLU) followed by two
// fully connected layers (ReLU, dropout after the first) and two heads,
// policy logits and tanh value. Forward and backward passes are written by
// hand on top of zs::kernels.
//
// Parameters are held as doubles but always rounded to float32-representable
// values, so saving them as 32-bit floats is lossless.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zerosweep/games.h"

namespace zs {

struct ArchConfig {
  int channels = 64;
  int fc1 = 256;
  int fc2 = 128;

  bool operator==(const ArchConfig&) const = default;
};

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
  // Batch-norm running statistics are stored but not optimized.
  bool trainable = true;

  bool operator==(const NamedArray&) const = default;
};

class NetworkWeights {
 public:
  // He-normal initialization, deterministic in `seed`.
  static NetworkWeights random(const GameSpec& spec, const ArchConfig& arch,
                               std::uint64_t seed);
  // Every array zero, including batch-norm scales.
  static NetworkWeights zeros(const GameSpec& spec, const ArchConfig& arch);

  const GameSpec& spec() const { return spec_; }
  const ArchConfig& arch() const { return arch_; }
  std::vector<NamedArray>& arrays() { return arrays_; }
  const std::vector<NamedArray>& arrays() const { return arrays_; }
  const NamedArray& array(std::string_view name) const;
  NamedArray& array(std::string_view name);

  int input_size() const { return kInputPlanes * spec_.cells(); }
  std::size_t parameter_count() const;
  bool all_finite() const;
  void round_to_float();

  bool operator==(const NetworkWeights&) const = default;

 private:
  NetworkWeights(const GameSpec& spec, const ArchConfig& arch);

  GameSpec spec_;
  ArchConfig arch_;
  std::vector<NamedArray> arrays_;
};

// Expected array names and shapes for a spec/architecture pair.
std::vector<NamedArray> weight_layout(const GameSpec& spec, const ArchConfig& arch);

enum class NetMode { kTrain, kEval };
enum class BatchNormMode { kBatchStats, kRunningStats };

struct NetOutput {
  std::vector<double> logits;
  std::vector<double> policy;  // softmax over all actions
  double value = 0.0;          // in [-1, 1]
};

// Eval mode: running batch-norm statistics, no dropout, deterministic.
// Train mode: batch statistics of this single input and dropout with
// probability `dropout` drawn from `seed`.
NetOutput forward(const NetworkWeights& weights, std::span<const double> input,
                  NetMode mode, double dropout = 0.0, std::uint64_t seed = 0);

// Eval-mode forward over `count` inputs laid out back to back.
std::vector<NetOutput> forward_batch(const NetworkWeights& weights,
                                     std::span<const double> inputs, int count);

std::vector<double> softmax(std::span<const double> logits);
// Softmax restricted to legal actions; illegal entries are exactly zero.
std::vector<double> masked_softmax(std::span<const double> logits, const ActionMask& legal);

struct LossTarget {
  enum class Kind { kPolicyOnly, kValueOnly, kSum, kProduct, kWeightedSum };
  Kind kind = Kind::kSum;
  double lambda = 0.5;  // WeightedSum only

  bool operator==(const LossTarget&) const = default;
};
// "policy_only", "value_only", "sum", "product", "weighted(<lambda>)".
std::string to_string(const LossTarget& target);
LossTarget parse_loss_target(std::string_view text);

struct LossBreakdown {
  double total = 0.0;
  double policy = 0.0;  // l_p = -pi . log p
  double value = 0.0;   // l_v = (v - z)^2
};

// Probabilities below this are clamped inside the log.
inline constexpr double kProbabilityFloor = 1e-12;

double combine_losses(double policy_loss, double value_loss, const LossTarget& target);

// Throws std::invalid_argument unless pi sums to 1 (within 1e-6), is
// non-negative and z is in [-1, 1].
LossBreakdown loss(std::span<const double> logits, double value,
                   std::span<const double> target_pi, double target_z,
                   const LossTarget& target);

struct TrainingExample {
  std::vector<double> input;   // encode(state)
  std::vector<double> policy;  // search policy pi
  double z = 0.0;              // outcome for the player to move
  int iteration = 0;           // self-play iteration that produced it
};

// Gradient buffers aligned with NetworkWeights::arrays(); empty for
// non-trainable arrays.
using Gradients = std::vector<std::vector<double>>;

struct PassOptions {
  BatchNormMode batch_norm = BatchNormMode::kBatchStats;
  double dropout = 0.0;
  std::uint64_t seed = 0;
};

// Mean loss over the batch. When `grads` is non-null it receives the
// gradient of the mean `target` loss with respect to every trainable array.
// When `weights_to_update` is non-null and batch statistics are used, its
// running statistics are updated (momentum 0.1).
LossBreakdown loss_and_gradients(const NetworkWeights& weights,
                                 std::span<const TrainingExample* const> batch,
                                 const LossTarget& target, const PassOptions& options,
                                 Gradients* grads,
                                 NetworkWeights* weights_to_update = nullptr);

struct TrainConfig {
  int ep = 10;
  int bs = 64;
  double lr = 0.005;
  double d = 0.3;

  void validate() const;
};

struct TrainResult {
  NetworkWeights weights;
  std::vector<LossBreakdown> epoch_losses;  // mean training loss per epoch
};

// Adam (0.9, 0.999, 1e-8) over shuffled minibatches; fresh optimizer state
// per call. Throws on an empty example list or a non-finite loss.
TrainResult train_epochs(NetworkWeights weights,
                         std::span<const TrainingExample* const> examples,
                         const TrainConfig& config, const LossTarget& target,
                         std::uint64_t seed);
TrainResult train_epochs(NetworkWeights weights, const std::vector<TrainingExample>& examples,
                         const TrainConfig& config, const LossTarget& target,
                         std::uint64_t seed);

struct GradientCheckOptions {
  int samples = 320;  // spread evenly across trainable arrays
  std::uint64_t seed = 7;
  // Running statistics (eval-mode network) by default.
  BatchNormMode batch_norm = BatchNormMode::kRunningStats;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
  // Samples discarded because a ReLU switched within +-epsilon.
  int skipped_kinks = 0;
  std::string worst_array;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares the analytic gradient of `target` on one example (dropout off)
// with central differences of step `epsilon`. A sampled weight whose
// perturbation flips any ReLU is replaced by another from the same array.
GradientCheckResult gradient_check(const NetworkWeights& weights,
                                   const TrainingExample& example,
                                   const LossTarget& target, double epsilon,
                                   const GradientCheckOptions& options = {});

}  // namespace zs
