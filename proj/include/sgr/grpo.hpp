// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0
//
// Group-relative policy optimization on a multi-label Bernoulli policy.
//
// The policy includes label a with probability sigmoid(w_a . x + b_a) for a
// context vector x, independently across labels. A sampled candidate is a
// label subset; its log-probability is the sum of per-label Bernoulli log
// terms. Training alternates group sampling from a frozen old policy, reward
// scoring, group-normalized advantages and a clipped-ratio update with an
// exact Bernoulli KL penalty towards a reference policy.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgr/corpus.hpp"
#include "sgr/extract.hpp"
#include "sgr/rewards.hpp"

namespace sgr::grpo {

using LabelMask = std::vector<std::uint8_t>;

// Parameters are stored row-major, one row [w_a(0..d-1), b_a] per label.
class ToyPolicy {
 public:
  ToyPolicy() = default;
  ToyPolicy(std::size_t num_labels, std::size_t feature_dim);

  // Weights ~ N(0, weight_scale^2), biases = logit(initial_prob).
  static ToyPolicy random(std::size_t num_labels, std::size_t feature_dim, std::uint64_t seed,
                          double weight_scale, double initial_prob);

  std::size_t num_labels() const { return num_labels_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t num_params() const { return params_.size(); }

  double& weight(std::size_t label, std::size_t j) { return params_[label * stride() + j]; }
  double weight(std::size_t label, std::size_t j) const { return params_[label * stride() + j]; }
  double& bias(std::size_t label) { return params_[label * stride() + feature_dim_]; }
  double bias(std::size_t label) const { return params_[label * stride() + feature_dim_]; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  std::vector<double> logits(std::span<const double> context) const;
  std::vector<double> probabilities(std::span<const double> context) const;
  double log_prob(const LabelMask& labels, std::span<const double> context) const;

  // Chain rule from per-label logit gradients to parameter gradients (accumulates).
  void accumulate_gradient(std::span<const double> dlogits, std::span<const double> context,
                           std::span<double> grad) const;

  bool operator==(const ToyPolicy&) const = default;

 private:
  std::size_t stride() const { return feature_dim_ + 1; }

  std::size_t num_labels_ = 0;
  std::size_t feature_dim_ = 0;
  std::vector<double> params_;
};

double parameter_distance(const ToyPolicy& a, const ToyPolicy& b);

// log p and log(1-p) for p = sigmoid(z), computed without overflow.
double log_sigmoid(double z);
double softplus(double z);

// Sum over labels of KL(Bernoulli(sigmoid(z)) || Bernoulli(sigmoid(z_ref))).
double bernoulli_kl(std::span<const double> logits, std::span<const double> ref_logits);

struct SyntheticTaskConfig {
  std::size_t vocab_size = 200;
  std::size_t feature_dim = 3;
  double zipf_exponent = 1.1;
  double head_marginal = 0.9;  // inclusion probability of the rank-1 label
  double noise_rate = 0.0;     // chance a label ignores the context and is redrawn from its marginal
  // Slope of the logistic inclusion probability around each label's decision
  // boundary; infinity gives a hard boundary.
  double label_sharpness = std::numeric_limits<double>::infinity();
  std::size_t num_contexts = 2000;
  double heldout_fraction = 0.2;
  double sft_fraction = 0.5;  // share of the training contexts reserved for the warm start
  std::uint64_t seed = 17;
  std::size_t head_top_k = 55;
};

// Contexts x ~ N(0, I_d). Label a is gold when u_a . x exceeds the threshold
// giving it marginal head_marginal * rank^-zipf_exponent (u_a unit-norm), so
// the gold sets are linearly realizable up to the noise.
class SyntheticTask {
 public:
  explicit SyntheticTask(const SyntheticTaskConfig& config);

  const SyntheticTaskConfig& config() const { return config_; }
  std::size_t num_labels() const { return config_.vocab_size; }
  std::size_t feature_dim() const { return config_.feature_dim; }
  std::size_t num_contexts() const { return config_.num_contexts; }
  // Contexts [0, num_sft) feed the warm start, [num_sft, num_train) the GRPO
  // queries and [num_train, num_contexts) the held-out evaluation.
  std::size_t num_train() const { return num_train_; }
  std::size_t num_sft() const { return num_sft_; }

  std::span<const double> context(std::size_t c) const;
  const LabelMask& gold(std::size_t c) const { return gold_[c]; }
  LabelSet gold_set(std::size_t c) const { return to_label_set(gold_[c]); }
  LabelSet to_label_set(const LabelMask& mask) const;

  // Target (population) inclusion probability per label, strictly decreasing.
  const std::vector<double>& marginals() const { return marginals_; }
  const std::vector<std::string>& label_names() const { return names_; }
  // Document frequencies over the training split with default tiers.
  const corpus::Vocabulary& vocabulary() const { return vocab_; }
  const extract::InflectionTable& inflections() const { return inflections_; }
  corpus::Tier tier(std::size_t label) const { return tiers_[label]; }

 private:
  SyntheticTaskConfig config_;
  std::size_t num_train_ = 0;
  std::size_t num_sft_ = 0;
  std::vector<double> contexts_;
  std::vector<LabelMask> gold_;
  std::vector<double> marginals_;
  std::vector<std::string> names_;
  corpus::Vocabulary vocab_;
  extract::InflectionTable inflections_;
  std::vector<corpus::Tier> tiers_;
};

struct Candidate {
  LabelMask labels;
  double old_log_prob = 0.0;
  rewards::RewardBreakdown reward;
};

struct CandidateGroup {
  std::size_t query = 0;
  std::vector<Candidate> candidates;
  std::vector<double> advantages;

  std::vector<double> rewards() const;
};

// G independent draws from `policy` at `context`, reproducible from `seed`.
CandidateGroup sample_group(const ToyPolicy& policy, std::span<const double> context,
                            std::size_t group_size, std::uint64_t seed, std::size_t query = 0);

// (r - mean) / population std; all zeros when every reward is equal.
// Throws std::invalid_argument for fewer than two rewards.
std::vector<double> normalize_advantages(std::span<const double> rewards);

enum class RewardMode { f1_only, word_only, combined };
std::string_view to_string(RewardMode mode);
std::optional<RewardMode> parse_reward_mode(std::string_view text);

// Weights actually applied for a reward mode: f1_only zeroes gamma, word_only zeroes alpha.
rewards::RewardWeights mode_weights(RewardMode mode, const rewards::RewardWeights& base);

enum class Optimizer { sgd, adam };
std::string_view to_string(Optimizer optimizer);
std::optional<Optimizer> parse_optimizer(std::string_view text);

struct GrpoConfig {
  std::size_t group_size = 8;
  double clip_epsilon = 0.2;
  double kl_beta = 0.04;
  Optimizer optimizer = Optimizer::sgd;
  double learning_rate = 20.0;
  std::size_t iterations = 500;
  std::size_t queries_per_iteration = 128;
  std::size_t refresh_interval = 1;  // old-policy refresh period in iterations
  std::size_t eval_interval = 50;
  std::uint64_t seed = 17;
  double init_weight_scale = 0.01;
  double init_prob = 0.5;
  std::size_t warm_start_epochs = 10;  // SFT epochs before GRPO
  double warm_start_lr = 1.0;
  rewards::RewardWeights reward_weights;
  rewards::TierWeights tier_weights;
  unsigned jobs = 1;

  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

struct LossResult {
  double loss = 0.0;
  double surrogate = 0.0;  // mean clipped surrogate (to be maximized)
  double kl = 0.0;
  double clip_fraction = 0.0;
  std::vector<double> gradient;  // d loss / d params, layout of ToyPolicy::params()
};

// -(1/G) sum_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i) + kl_beta * KL(policy || ref)
// at `context`, with rho_i = exp(log pi(y_i) - log pi_old(y_i)). Throws
// DivergenceError naming the candidate when a value is not finite.
LossResult grpo_loss(const ToyPolicy& policy, const ToyPolicy& old, const ToyPolicy& ref,
                     const CandidateGroup& group, std::span<const double> context,
                     const GrpoConfig& cfg);

struct SftResult {
  ToyPolicy policy;
  std::vector<double> log_likelihood;  // per epoch, entry 0 = before training
};

// Maximizes the mean (over the warm-start contexts) of the summed per-label
// log-likelihood of the gold sets. Each epoch is one full-batch damped Newton
// step per label, scaled by `lr` and halved until that label's likelihood does
// not decrease. Throws DivergenceError on non-finite values.
SftResult sft_warm_start(const ToyPolicy& policy, const SyntheticTask& task, std::size_t epochs,
                         double lr);

double training_log_likelihood(const ToyPolicy& policy, const SyntheticTask& task);

// Greedy decoding: labels with inclusion probability above 0.5.
LabelMask greedy_labels(const ToyPolicy& policy, std::span<const double> context);

std::string render_candidate(const LabelSet& labels);

struct TierStats {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct HeldoutEval {
  double mean_reward = 0.0;  // composite reward (combined weights) of greedy predictions
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fp_per_sample = 0.0;
  double mean_predicted = 0.0;
  std::array<TierStats, 3> tiers{};  // head, mid, tail
};

HeldoutEval evaluate_heldout(const ToyPolicy& policy, const SyntheticTask& task,
                             const GrpoConfig& cfg);

struct TracePoint {
  std::size_t iteration = 0;
  double mean_reward = 0.0;  // mean sampled training reward under the active mode
  double loss = 0.0;
  double kl = 0.0;
  std::optional<HeldoutEval> heldout;
};

struct TrainResult {
  std::vector<TracePoint> trace;
  ToyPolicy policy;
  ToyPolicy reference;
  HeldoutEval final_eval;
};

// Runs cfg.iterations updates. Trace entry t describes the policy after t
// updates; the last entry (t = iterations) samples without updating. When
// `initial` is empty the policy starts from ToyPolicy::random (followed by
// cfg.warm_start_epochs of SFT). The reference policy is the starting policy.
TrainResult train(const GrpoConfig& cfg, const SyntheticTask& task, RewardMode mode,
                  std::optional<ToyPolicy> initial = std::nullopt,
                  const std::function<void(const TracePoint&)>& on_point = {});

std::string trace_line(const TracePoint& point);

// Flat `key = value` config; '#' starts a comment. Unknown keys throw DataError.
void apply_config(std::istream& in, GrpoConfig& cfg, SyntheticTaskConfig& task);
void apply_config_file(const std::string& path, GrpoConfig& cfg, SyntheticTaskConfig& task);

}  // namespace sgr::grpo
