#include "zerosweep/net.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "zerosweep/errors.h"
#include "zerosweep/kernels.h"
#include "zerosweep/util.h"

namespace zs {
namespace {

constexpr int kConvLayers = 4;
constexpr int kArraysPerConv = 5;  // weight, gamma, beta, running mean, running var
constexpr int kFc1W = kConvLayers * kArraysPerConv;
constexpr int kFc1B = kFc1W + 1;
constexpr int kFc2W = kFc1W + 2;
constexpr int kFc2B = kFc1W + 3;
constexpr int kPolicyW = kFc1W + 4;
constexpr int kPolicyB = kFc1W + 5;
constexpr int kValueW = kFc1W + 6;
constexpr int kValueB = kFc1W + 7;
constexpr int kArrayCount = kFc1W + 8;

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.1;

constexpr int conv_w(int l) { return l * kArraysPerConv; }
constexpr int bn_gamma(int l) { return l * kArraysPerConv + 1; }
constexpr int bn_beta(int l) { return l * kArraysPerConv + 2; }
constexpr int bn_mean(int l) { return l * kArraysPerConv + 3; }
constexpr int bn_var(int l) { return l * kArraysPerConv + 4; }

std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

double to_float(double x) { return static_cast<double>(static_cast<float>(x)); }

// Every buffer of one forward pass, kept for the backward pass.
struct Pass {
  int batch = 0;
  int positions = 0;  // batch * cells
  BatchNormMode bn_mode = BatchNormMode::kRunningStats;
  std::array<std::vector<double>, kConvLayers + 1> act;  // act[0] = input
  std::array<std::vector<double>, kConvLayers> col, conv_out, xhat, bn_out;
  std::array<std::vector<double>, kConvLayers> mean, var, invstd;
  std::vector<double> flat, h1pre, h1, mask, h2pre, h2, logits, value_pre, value;
};

void resize(std::vector<double>& v, std::size_t n) { v.resize(n); }

void run_forward(const NetworkWeights& w, std::span<const std::span<const double>> inputs,
                 BatchNormMode bn_mode, double dropout, std::uint64_t seed, Pass& p) {
  const GameSpec& spec = w.spec();
  const ArchConfig& arch = w.arch();
  const auto& a = w.arrays();
  const int n = static_cast<int>(inputs.size());
  const int cells = spec.cells();
  const int size = spec.board_size();
  const int m = n * cells;
  const int c = arch.channels;
  const int actions = spec.action_space_size();
  const int flat_size = c * cells;
  p.batch = n;
  p.positions = m;
  p.bn_mode = bn_mode;

  resize(p.act[0], static_cast<std::size_t>(kInputPlanes) * m);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(inputs[i].size()) != w.input_size()) {
      throw ShapeError("input has " + std::to_string(inputs[i].size()) + " values, expected " +
                       std::to_string(w.input_size()));
    }
    for (int plane = 0; plane < kInputPlanes; ++plane) {
      std::copy_n(inputs[i].data() + plane * cells, cells,
                  p.act[0].data() + static_cast<std::size_t>(plane) * m + i * cells);
    }
  }

  for (int l = 0; l < kConvLayers; ++l) {
    const int in_c = l == 0 ? kInputPlanes : c;
    const kernels::ConvDims dims{in_c, c, n, size};
    resize(p.col[l], static_cast<std::size_t>(dims.patch()) * m);
    resize(p.conv_out[l], static_cast<std::size_t>(c) * m);
    resize(p.xhat[l], static_cast<std::size_t>(c) * m);
    resize(p.bn_out[l], static_cast<std::size_t>(c) * m);
    resize(p.mean[l], c);
    resize(p.var[l], c);
    resize(p.invstd[l], c);
    resize(p.act[l + 1], static_cast<std::size_t>(c) * m);
    kernels::conv3x3_forward(dims, p.act[l], a[conv_w(l)].values, p.conv_out[l], p.col[l]);
    if (bn_mode == BatchNormMode::kBatchStats) {
      kernels::batchnorm_forward_train(c, m, p.conv_out[l], a[bn_gamma(l)].values,
                                       a[bn_beta(l)].values, kBatchNormEps, p.bn_out[l],
                                       p.xhat[l], p.mean[l], p.var[l], p.invstd[l]);
    } else {
      kernels::batchnorm_forward_eval(c, m, p.conv_out[l], a[bn_gamma(l)].values,
                                      a[bn_beta(l)].values, a[bn_mean(l)].values,
                                      a[bn_var(l)].values, kBatchNormEps, p.bn_out[l],
                                      p.xhat[l], p.invstd[l]);
    }
    auto& out = p.act[l + 1];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(p.bn_out[l][i], 0.0);
  }

  resize(p.flat, static_cast<std::size_t>(n) * flat_size);
  const auto& last = p.act[kConvLayers];
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < n; ++i) {
      std::copy_n(last.data() + static_cast<std::size_t>(ch) * m + i * cells, cells,
                  p.flat.data() + static_cast<std::size_t>(i) * flat_size + ch * cells);
    }
  }

  resize(p.h1pre, static_cast<std::size_t>(n) * arch.fc1);
  resize(p.h1, p.h1pre.size());
  resize(p.mask, p.h1pre.size());
  kernels::dense_forward(n, flat_size, arch.fc1, p.flat, a[kFc1W].values, a[kFc1B].values,
                         p.h1pre);
  if (dropout > 0.0) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(1.0 - dropout);
    const double scale = 1.0 / (1.0 - dropout);
    for (auto& v : p.mask) v = keep(rng) ? scale : 0.0;
  } else {
    std::fill(p.mask.begin(), p.mask.end(), 1.0);
  }
  for (std::size_t i = 0; i < p.h1.size(); ++i) p.h1[i] = std::max(p.h1pre[i], 0.0) * p.mask[i];

  resize(p.h2pre, static_cast<std::size_t>(n) * arch.fc2);
  resize(p.h2, p.h2pre.size());
  kernels::dense_forward(n, arch.fc1, arch.fc2, p.h1, a[kFc2W].values, a[kFc2B].values, p.h2pre);
  for (std::size_t i = 0; i < p.h2.size(); ++i) p.h2[i] = std::max(p.h2pre[i], 0.0);

  resize(p.logits, static_cast<std::size_t>(n) * actions);
  kernels::dense_forward(n, arch.fc2, actions, p.h2, a[kPolicyW].values, a[kPolicyB].values,
                         p.logits);
  resize(p.value_pre, n);
  resize(p.value, n);
  kernels::dense_forward(n, arch.fc2, 1, p.h2, a[kValueW].values, a[kValueB].values,
                         p.value_pre);
  for (int i = 0; i < n; ++i) p.value[i] = std::tanh(p.value_pre[i]);
}

// grad_logits [batch][actions], grad_value_pre [batch] are gradients of the
// scalar being differentiated.
void run_backward(const NetworkWeights& w, Pass& p, std::span<const double> grad_logits,
                  std::span<const double> grad_value_pre, Gradients& g) {
  const GameSpec& spec = w.spec();
  const ArchConfig& arch = w.arch();
  const auto& a = w.arrays();
  const int n = p.batch;
  const int m = p.positions;
  const int cells = spec.cells();
  const int c = arch.channels;
  const int actions = spec.action_space_size();
  const int flat_size = c * cells;

  g.assign(kArrayCount, {});
  for (int i = 0; i < kArrayCount; ++i) {
    if (a[i].trainable) g[i].assign(a[i].values.size(), 0.0);
  }
  std::vector<double> scratch;

  // Heads.
  std::vector<double> d_h2(static_cast<std::size_t>(n) * arch.fc2);
  std::vector<double> d_h2_value(d_h2.size());
  scratch.resize(static_cast<std::size_t>(n) * std::max(actions, 1));
  kernels::dense_backward(n, arch.fc2, actions, p.h2, a[kPolicyW].values, grad_logits,
                          g[kPolicyW], g[kPolicyB], d_h2, scratch);
  kernels::dense_backward(n, arch.fc2, 1, p.h2, a[kValueW].values, grad_value_pre, g[kValueW],
                          g[kValueB], d_h2_value, scratch);
  for (std::size_t i = 0; i < d_h2.size(); ++i) {
    d_h2[i] = (d_h2[i] + d_h2_value[i]) * (p.h2pre[i] > 0.0 ? 1.0 : 0.0);
  }

  std::vector<double> d_h1(static_cast<std::size_t>(n) * arch.fc1);
  scratch.resize(static_cast<std::size_t>(n) * std::max(arch.fc2, arch.fc1));
  kernels::dense_backward(n, arch.fc1, arch.fc2, p.h1, a[kFc2W].values, d_h2, g[kFc2W],
                          g[kFc2B], d_h1, scratch);
  for (std::size_t i = 0; i < d_h1.size(); ++i) {
    d_h1[i] *= p.mask[i] * (p.h1pre[i] > 0.0 ? 1.0 : 0.0);
  }

  std::vector<double> d_flat(static_cast<std::size_t>(n) * flat_size);
  kernels::dense_backward(n, flat_size, arch.fc1, p.flat, a[kFc1W].values, d_h1, g[kFc1W],
                          g[kFc1B], d_flat, scratch);

  std::vector<double> d_act(static_cast<std::size_t>(c) * m);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < n; ++i) {
      std::copy_n(d_flat.data() + static_cast<std::size_t>(i) * flat_size + ch * cells, cells,
                  d_act.data() + static_cast<std::size_t>(ch) * m + i * cells);
    }
  }

  std::vector<double> d_bn(d_act.size());
  std::vector<double> d_conv(d_act.size());
  for (int l = kConvLayers - 1; l >= 0; --l) {
    const int in_c = l == 0 ? kInputPlanes : c;
    const kernels::ConvDims dims{in_c, c, n, spec.board_size()};
    for (std::size_t i = 0; i < d_act.size(); ++i) {
      d_bn[i] = p.bn_out[l][i] > 0.0 ? d_act[i] : 0.0;
    }
    if (p.bn_mode == BatchNormMode::kBatchStats) {
      kernels::batchnorm_backward_train(c, m, p.xhat[l], a[bn_gamma(l)].values, p.invstd[l],
                                        d_bn, d_conv, g[bn_gamma(l)], g[bn_beta(l)]);
    } else {
      kernels::batchnorm_backward_eval(c, m, p.xhat[l], a[bn_gamma(l)].values, p.invstd[l],
                                       d_bn, d_conv, g[bn_gamma(l)], g[bn_beta(l)]);
    }
    scratch.resize(static_cast<std::size_t>(std::max(dims.patch(), c)) * m +
                   static_cast<std::size_t>(dims.patch()) * c);
    if (l == 0) {
      kernels::conv3x3_backward(dims, p.col[l], a[conv_w(l)].values, d_conv, g[conv_w(l)], {},
                                scratch);
    } else {
      kernels::conv3x3_backward(dims, p.col[l], a[conv_w(l)].values, d_conv, g[conv_w(l)],
                                d_act, scratch);
    }
  }
}

void check_target(std::span<const double> pi, double z, int actions) {
  if (static_cast<int>(pi.size()) != actions) {
    throw ShapeError("policy target has " + std::to_string(pi.size()) + " entries, expected " +
                     std::to_string(actions));
  }
  double sum = 0.0;
  for (double x : pi) {
    if (!(x >= 0.0)) throw std::invalid_argument("policy target has a negative entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("policy target is not normalized (sum " + std::to_string(sum) +
                                ")");
  }
  if (!(z >= -1.0 && z <= 1.0)) throw std::invalid_argument("outcome target outside [-1, 1]");
}

// Loss of one example plus gradients with respect to its logits and value.
LossBreakdown example_loss(std::span<const double> logits, double v, std::span<const double> pi,
                           double z, const LossTarget& target, std::span<double> grad_logits,
                           double* grad_v) {
  const std::vector<double> p = softmax(logits);
  double lp = 0.0;
  double unclamped_mass = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (pi[i] == 0.0) continue;
    if (p[i] >= kProbabilityFloor) {
      lp -= pi[i] * std::log(p[i]);
      unclamped_mass += pi[i];
    } else {
      lp -= pi[i] * std::log(kProbabilityFloor);
    }
  }
  const double lv = (v - z) * (v - z);
  LossBreakdown out{combine_losses(lp, lv, target), lp, lv};
  if (grad_logits.empty()) return out;

  double wp = 0.0;
  double wv = 0.0;
  switch (target.kind) {
    case LossTarget::Kind::kPolicyOnly: wp = 1.0; break;
    case LossTarget::Kind::kValueOnly: wv = 1.0; break;
    case LossTarget::Kind::kSum: wp = 1.0; wv = 1.0; break;
    case LossTarget::Kind::kProduct: wp = lv; wv = lp; break;
    case LossTarget::Kind::kWeightedSum: wp = target.lambda; wv = 1.0 - target.lambda; break;
  }
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double own = p[j] >= kProbabilityFloor ? pi[j] : 0.0;
    grad_logits[j] = wp * (p[j] * unclamped_mass - own);
  }
  *grad_v = wv * 2.0 * (v - z);
  return out;
}

}  // namespace

// ---- weights -------------------------------------------------------------

std::vector<NamedArray> weight_layout(const GameSpec& spec, const ArchConfig& arch) {
  if (arch.channels < 1 || arch.fc1 < 1 || arch.fc2 < 1) {
    throw ConfigError("architecture sizes must be positive");
  }
  std::vector<NamedArray> out;
  const int c = arch.channels;
  for (int l = 0; l < kConvLayers; ++l) {
    const std::string idx = std::to_string(l + 1);
    const int in_c = l == 0 ? kInputPlanes : c;
    out.push_back({"conv" + idx + ".weight", {c, in_c, 3, 3}, {}, true});
    out.push_back({"bn" + idx + ".gamma", {c}, {}, true});
    out.push_back({"bn" + idx + ".beta", {c}, {}, true});
    out.push_back({"bn" + idx + ".running_mean", {c}, {}, false});
    out.push_back({"bn" + idx + ".running_var", {c}, {}, false});
  }
  const int actions = spec.action_space_size();
  out.push_back({"fc1.weight", {arch.fc1, c * spec.cells()}, {}, true});
  out.push_back({"fc1.bias", {arch.fc1}, {}, true});
  out.push_back({"fc2.weight", {arch.fc2, arch.fc1}, {}, true});
  out.push_back({"fc2.bias", {arch.fc2}, {}, true});
  out.push_back({"policy.weight", {actions, arch.fc2}, {}, true});
  out.push_back({"policy.bias", {actions}, {}, true});
  out.push_back({"value.weight", {1, arch.fc2}, {}, true});
  out.push_back({"value.bias", {1}, {}, true});
  for (auto& a : out) a.values.assign(numel(a.shape), 0.0);
  return out;
}

NetworkWeights::NetworkWeights(const GameSpec& spec, const ArchConfig& arch)
    : spec_(spec), arch_(arch), arrays_(weight_layout(spec, arch)) {}

NetworkWeights NetworkWeights::zeros(const GameSpec& spec, const ArchConfig& arch) {
  return NetworkWeights(spec, arch);
}

NetworkWeights NetworkWeights::random(const GameSpec& spec, const ArchConfig& arch,
                                      std::uint64_t seed) {
  NetworkWeights w(spec, arch);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& a : w.arrays_) {
    const std::string& name = a.name;
    const bool is_weight = name.ends_with(".weight");
    if (is_weight) {
      const std::size_t fan_in = a.values.size() / static_cast<std::size_t>(a.shape[0]);
      const bool head = name.starts_with("policy") || name.starts_with("value");
      const double sd = std::sqrt((head ? 1.0 : 2.0) / static_cast<double>(fan_in));
      for (auto& v : a.values) v = normal(rng) * sd;
    } else if (name.ends_with(".gamma") || name.ends_with(".running_var")) {
      std::fill(a.values.begin(), a.values.end(), 1.0);
    }
  }
  w.round_to_float();
  return w;
}

const NamedArray& NetworkWeights::array(std::string_view name) const {
  for (const auto& a : arrays_) {
    if (a.name == name) return a;
  }
  throw std::out_of_range("no weight array named " + std::string(name));
}

NamedArray& NetworkWeights::array(std::string_view name) {
  return const_cast<NamedArray&>(std::as_const(*this).array(name));
}

std::size_t NetworkWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& a : arrays_) n += a.values.size();
  return n;
}

bool NetworkWeights::all_finite() const {
  for (const auto& a : arrays_) {
    for (double v : a.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void NetworkWeights::round_to_float() {
  for (auto& a : arrays_) {
    for (auto& v : a.values) v = to_float(v);
  }
}

// ---- forward -------------------------------------------------------------

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (auto& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<double> masked_softmax(std::span<const double> logits, const ActionMask& legal) {
  std::vector<double> p(logits.size(), 0.0);
  double mx = -INFINITY;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (legal[i]) mx = std::max(mx, logits[i]);
  }
  if (mx == -INFINITY) return p;
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (legal[i]) {
      p[i] = std::exp(logits[i] - mx);
      sum += p[i];
    }
  }
  for (auto& v : p) v /= sum;
  return p;
}

NetOutput forward(const NetworkWeights& weights, std::span<const double> input, NetMode mode,
                  double dropout, std::uint64_t seed) {
  thread_local Pass pass;
  const std::span<const double> one[1] = {input};
  const bool train = mode == NetMode::kTrain;
  run_forward(weights, one,
              train ? BatchNormMode::kBatchStats : BatchNormMode::kRunningStats,
              train ? dropout : 0.0, seed, pass);
  NetOutput out;
  out.logits = pass.logits;
  out.policy = softmax(out.logits);
  out.value = pass.value[0];
  return out;
}

std::vector<NetOutput> forward_batch(const NetworkWeights& weights,
                                     std::span<const double> inputs, int count) {
  const int in = weights.input_size();
  if (static_cast<int>(inputs.size()) != in * count) {
    throw ShapeError("batch input size mismatch");
  }
  std::vector<std::span<const double>> views;
  for (int i = 0; i < count; ++i) views.push_back(inputs.subspan(static_cast<std::size_t>(i) * in, in));
  thread_local Pass pass;
  run_forward(weights, views, BatchNormMode::kRunningStats, 0.0, 0, pass);
  const int actions = weights.spec().action_space_size();
  std::vector<NetOutput> out(count);
  for (int i = 0; i < count; ++i) {
    out[i].logits.assign(pass.logits.begin() + i * actions, pass.logits.begin() + (i + 1) * actions);
    out[i].policy = softmax(out[i].logits);
    out[i].value = pass.value[i];
  }
  return out;
}

// ---- losses --------------------------------------------------------------

std::string to_string(const LossTarget& target) {
  switch (target.kind) {
    case LossTarget::Kind::kPolicyOnly: return "policy_only";
    case LossTarget::Kind::kValueOnly: return "value_only";
    case LossTarget::Kind::kSum: return "sum";
    case LossTarget::Kind::kProduct: return "product";
    case LossTarget::Kind::kWeightedSum:
      return "weighted(" + format_double(target.lambda) + ")";
  }
  return "?";
}

LossTarget parse_loss_target(std::string_view text) {
  LossTarget t;
  if (text == "policy_only") {
    t.kind = LossTarget::Kind::kPolicyOnly;
  } else if (text == "value_only") {
    t.kind = LossTarget::Kind::kValueOnly;
  } else if (text == "sum") {
    t.kind = LossTarget::Kind::kSum;
  } else if (text == "product") {
    t.kind = LossTarget::Kind::kProduct;
  } else if (text == "weighted") {
    t.kind = LossTarget::Kind::kWeightedSum;
  } else if (text.starts_with("weighted(") && text.ends_with(")")) {
    t.kind = LossTarget::Kind::kWeightedSum;
    const std::string inner(text.substr(9, text.size() - 10));
    std::size_t used = 0;
    try {
      t.lambda = std::stod(inner, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != inner.size()) throw ConfigError("bad lambda in loss target '" + std::string(text) + "'");
  } else {
    throw ConfigError("unknown loss target '" + std::string(text) + "'");
  }
  if (!(t.lambda >= 0.0 && t.lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  return t;
}

double combine_losses(double lp, double lv, const LossTarget& target) {
  switch (target.kind) {
    case LossTarget::Kind::kPolicyOnly: return lp;
    case LossTarget::Kind::kValueOnly: return lv;
    case LossTarget::Kind::kSum: return lp + lv;
    case LossTarget::Kind::kProduct: return lp * lv;
    case LossTarget::Kind::kWeightedSum: return target.lambda * lp + (1.0 - target.lambda) * lv;
  }
  return lp + lv;
}

LossBreakdown loss(std::span<const double> logits, double value, std::span<const double> target_pi,
                   double target_z, const LossTarget& target) {
  check_target(target_pi, target_z, static_cast<int>(logits.size()));
  return example_loss(logits, value, target_pi, target_z, target, {}, nullptr);
}

namespace {

// Forward pass plus mean loss; fills the head gradients when asked.
LossBreakdown batch_loss(const NetworkWeights& weights,
                         std::span<const TrainingExample* const> batch, const LossTarget& target,
                         const PassOptions& options, Pass& pass,
                         std::vector<double>* grad_logits, std::vector<double>* grad_value_pre) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const int actions = weights.spec().action_space_size();
  std::vector<std::span<const double>> inputs;
  inputs.reserve(batch.size());
  for (const TrainingExample* ex : batch) {
    check_target(ex->policy, ex->z, actions);
    inputs.emplace_back(ex->input);
  }
  run_forward(weights, inputs, options.batch_norm, options.dropout, options.seed, pass);

  const int n = static_cast<int>(batch.size());
  const bool want_grads = grad_logits != nullptr;
  if (want_grads) {
    grad_logits->assign(static_cast<std::size_t>(n) * actions, 0.0);
    grad_value_pre->assign(n, 0.0);
  }
  LossBreakdown mean;
  for (int i = 0; i < n; ++i) {
    double gv = 0.0;
    std::span<double> gl;
    if (want_grads) gl = std::span<double>(*grad_logits).subspan(static_cast<std::size_t>(i) * actions, actions);
    const LossBreakdown l = example_loss(
        std::span<const double>(pass.logits).subspan(static_cast<std::size_t>(i) * actions, actions),
        pass.value[i], batch[i]->policy, batch[i]->z, target, gl, &gv);
    mean.total += l.total;
    mean.policy += l.policy;
    mean.value += l.value;
    if (want_grads) {
      for (auto& g : gl) g /= n;
      (*grad_value_pre)[i] = gv * (1.0 - pass.value[i] * pass.value[i]) / n;
    }
  }
  mean.total /= n;
  mean.policy /= n;
  mean.value /= n;
  return mean;
}

// Which ReLU units are active. Two passes with the same pattern lie on one
// linear piece of every ReLU.
std::vector<bool> relu_pattern(const Pass& p) {
  std::vector<bool> out;
  for (const auto& layer : p.bn_out) {
    for (double v : layer) out.push_back(v > 0.0);
  }
  for (double v : p.h1pre) out.push_back(v > 0.0);
  for (double v : p.h2pre) out.push_back(v > 0.0);
  return out;
}

}  // namespace

LossBreakdown loss_and_gradients(const NetworkWeights& weights,
                                 std::span<const TrainingExample* const> batch,
                                 const LossTarget& target, const PassOptions& options,
                                 Gradients* grads, NetworkWeights* weights_to_update) {
  thread_local Pass pass;
  std::vector<double> grad_logits;
  std::vector<double> grad_value_pre;
  const LossBreakdown mean = batch_loss(weights, batch, target, options, pass,
                                        grads ? &grad_logits : nullptr,
                                        grads ? &grad_value_pre : nullptr);

  if (grads) run_backward(weights, pass, grad_logits, grad_value_pre, *grads);

  if (weights_to_update && options.batch_norm == BatchNormMode::kBatchStats) {
    auto& a = weights_to_update->arrays();
    const double m = pass.positions;
    const double unbias = m > 1 ? m / (m - 1) : 1.0;
    for (int l = 0; l < kConvLayers; ++l) {
      auto& rm = a[bn_mean(l)].values;
      auto& rv = a[bn_var(l)].values;
      for (std::size_t ch = 0; ch < rm.size(); ++ch) {
        rm[ch] = to_float((1.0 - kBatchNormMomentum) * rm[ch] + kBatchNormMomentum * pass.mean[l][ch]);
        rv[ch] = to_float((1.0 - kBatchNormMomentum) * rv[ch] +
                          kBatchNormMomentum * pass.var[l][ch] * unbias);
      }
    }
  }
  return mean;
}

// ---- training ------------------------------------------------------------

void TrainConfig::validate() const {
  if (ep < 1) throw ConfigError("ep must be >= 1");
  if (bs < 1) throw ConfigError("bs must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(d >= 0.0 && d < 1.0)) throw ConfigError("d must lie in [0, 1)");
}

TrainResult train_epochs(NetworkWeights weights, std::span<const TrainingExample* const> examples,
                         const TrainConfig& config, const LossTarget& target,
                         std::uint64_t seed) {
  config.validate();
  if (examples.empty()) throw std::invalid_argument("train_epochs: no training examples");

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kAdamEps = 1e-8;

  auto& arrays = weights.arrays();
  Gradients first_moment(arrays.size());
  Gradients second_moment(arrays.size());
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    if (!arrays[i].trainable) continue;
    first_moment[i].assign(arrays[i].values.size(), 0.0);
    second_moment[i].assign(arrays[i].values.size(), 0.0);
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const TrainingExample*> batch;
  Gradients grads;
  long step = 0;

  TrainResult result{weights, {}};
  for (int epoch = 0; epoch < config.ep; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown sum;
    const std::size_t batches = (examples.size() + config.bs - 1) / config.bs;
    for (std::size_t b = 0; b < batches; ++b) {
      batch.clear();
      const std::size_t lo = b * config.bs;
      const std::size_t hi = std::min(examples.size(), lo + config.bs);
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(examples[order[i]]);

      const PassOptions opts{BatchNormMode::kBatchStats, config.d,
                             derive_seed(seed, {static_cast<std::uint64_t>(epoch), b})};
      const LossBreakdown l = loss_and_gradients(weights, batch, target, opts, &grads, &weights);
      if (!std::isfinite(l.total) || !std::isfinite(l.policy) || !std::isfinite(l.value)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                             ", batch " + std::to_string(b + 1) + " (l_p=" +
                             std::to_string(l.policy) + ", l_v=" + std::to_string(l.value) + ")");
      }

      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t i = 0; i < arrays.size(); ++i) {
        if (!arrays[i].trainable) continue;
        auto& w = arrays[i].values;
        auto& m1 = first_moment[i];
        auto& m2 = second_moment[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
          m1[j] = kBeta1 * m1[j] + (1.0 - kBeta1) * g[j];
          m2[j] = kBeta2 * m2[j] + (1.0 - kBeta2) * g[j] * g[j];
          const double update = config.lr * (m1[j] / c1) / (std::sqrt(m2[j] / c2) + kAdamEps);
          w[j] = to_float(w[j] - update);
        }
      }
      const double count = static_cast<double>(hi - lo);
      sum.total += l.total * count;
      sum.policy += l.policy * count;
      sum.value += l.value * count;
    }
    const double total = static_cast<double>(examples.size());
    result.epoch_losses.push_back({sum.total / total, sum.policy / total, sum.value / total});
  }
  if (!weights.all_finite()) throw NumericalError("training produced non-finite weights");
  result.weights = std::move(weights);
  return result;
}

TrainResult train_epochs(NetworkWeights weights, const std::vector<TrainingExample>& examples,
                         const TrainConfig& config, const LossTarget& target,
                         std::uint64_t seed) {
  std::vector<const TrainingExample*> ptrs;
  ptrs.reserve(examples.size());
  for (const auto& e : examples) ptrs.push_back(&e);
  return train_epochs(std::move(weights), ptrs, config, target, seed);
}

// ---- gradient check ------------------------------------------------------

GradientCheckResult gradient_check(const NetworkWeights& weights, const TrainingExample& example,
                                   const LossTarget& target, double epsilon,
                                   const GradientCheckOptions& options) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  const TrainingExample* batch[1] = {&example};
  const PassOptions opts{options.batch_norm, 0.0, 0};
  Gradients analytic;
  loss_and_gradients(weights, batch, target, opts, &analytic);

  NetworkWeights probe = weights;
  auto& arrays = probe.arrays();
  int trainable = 0;
  for (const auto& a : arrays) trainable += a.trainable ? 1 : 0;
  const int per_array = (options.samples + trainable - 1) / trainable;

  Pass pass;
  std::mt19937_64 rng(options.seed);
  GradientCheckResult result;
  for (std::size_t ai = 0; ai < arrays.size(); ++ai) {
    if (!arrays[ai].trainable) continue;
    auto& values = arrays[ai].values;
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    int taken = 0;
    for (std::size_t j : idx) {
      if (taken == per_array) break;
      const double saved = values[j];
      values[j] = saved + epsilon;
      const double plus = batch_loss(probe, batch, target, opts, pass, nullptr, nullptr).total;
      const std::vector<bool> plus_pattern = relu_pattern(pass);
      values[j] = saved - epsilon;
      const double minus = batch_loss(probe, batch, target, opts, pass, nullptr, nullptr).total;
      values[j] = saved;
      if (relu_pattern(pass) != plus_pattern) {
        // A unit changes sides within [w - eps, w + eps]; the difference
        // quotient straddles a kink and says nothing about the derivative.
        ++result.skipped_kinks;
        continue;
      }
      ++taken;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[ai][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_relative_error || result.worst_index < 0) {
        result.max_relative_error = rel;
        result.worst_array = arrays[ai].name;
        result.worst_index = static_cast<int>(j);
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace zs
