// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#include "sgr/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include "sgr/errors.hpp"
#include "sgr/parallel.hpp"

namespace sgr::grpo {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Inverse of the standard normal CDF by bisection; accurate to ~1e-15.
double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Plain gradient descent, or Adam, on a flat parameter vector.
class Stepper {
 public:
  Stepper(Optimizer kind, std::size_t n, double lr) : kind_(kind), lr_(lr) {
    if (kind_ == Optimizer::adam) {
      m_.assign(n, 0.0);
      v_.assign(n, 0.0);
    }
  }

  void step(std::span<double> params, std::span<const double> grad) {
    if (kind_ == Optimizer::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grad[i];
      return;
    }
    ++t_;
    double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  Optimizer kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw DivergenceError(what + " is not finite");
}

}  // namespace

// ---- policy -----------------------------------------------------------------

ToyPolicy::ToyPolicy(std::size_t num_labels, std::size_t feature_dim)
    : num_labels_(num_labels), feature_dim_(feature_dim), params_(num_labels * (feature_dim + 1), 0.0) {}

ToyPolicy ToyPolicy::random(std::size_t num_labels, std::size_t feature_dim, std::uint64_t seed,
                            double weight_scale, double initial_prob) {
  if (!(initial_prob > 0.0 && initial_prob < 1.0)) {
    throw std::invalid_argument("ToyPolicy::random: initial_prob must lie in (0,1)");
  }
  ToyPolicy p(num_labels, feature_dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double b = std::log(initial_prob / (1.0 - initial_prob));
  for (std::size_t a = 0; a < num_labels; ++a) {
    for (std::size_t j = 0; j < feature_dim; ++j) p.weight(a, j) = weight_scale * normal(rng);
    p.bias(a) = b;
  }
  return p;
}

std::vector<double> ToyPolicy::logits(std::span<const double> context) const {
  std::vector<double> z(num_labels_);
  for (std::size_t a = 0; a < num_labels_; ++a) {
    std::span<const double> row(params_.data() + a * stride(), feature_dim_);
    z[a] = dot(row, context) + bias(a);
  }
  return z;
}

std::vector<double> ToyPolicy::probabilities(std::span<const double> context) const {
  auto z = logits(context);
  for (auto& v : z) v = sigmoid(v);
  return z;
}

double ToyPolicy::log_prob(const LabelMask& labels, std::span<const double> context) const {
  auto z = logits(context);
  double lp = 0.0;
  // log sigmoid(z) = z - softplus(z); log(1 - sigmoid(z)) = -softplus(z)
  for (std::size_t a = 0; a < num_labels_; ++a) lp += (labels[a] ? z[a] : 0.0) - softplus(z[a]);
  return lp;
}

void ToyPolicy::accumulate_gradient(std::span<const double> dlogits, std::span<const double> context,
                                    std::span<double> grad) const {
  for (std::size_t a = 0; a < num_labels_; ++a) {
    double g = dlogits[a];
    if (g == 0.0) continue;
    double* row = grad.data() + a * stride();
    for (std::size_t j = 0; j < feature_dim_; ++j) row[j] += g * context[j];
    row[feature_dim_] += g;
  }
}

double parameter_distance(const ToyPolicy& a, const ToyPolicy& b) {
  double s = 0.0;
  auto pa = a.params();
  auto pb = b.params();
  for (std::size_t i = 0; i < pa.size(); ++i) s += (pa[i] - pb[i]) * (pa[i] - pb[i]);
  return std::sqrt(s);
}

double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double log_sigmoid(double z) { return -softplus(-z); }

double bernoulli_kl(std::span<const double> logits, std::span<const double> ref_logits) {
  double kl = 0.0;
  for (std::size_t a = 0; a < logits.size(); ++a) {
    double z = logits[a], q = ref_logits[a];
    double p = sigmoid(z);
    double log_p = -softplus(-z), log_1mp = -softplus(z);
    double log_q = -softplus(-q), log_1mq = -softplus(q);
    kl += p * (log_p - log_q) + (1.0 - p) * (log_1mp - log_1mq);
  }
  return std::max(kl, 0.0);
}

// ---- synthetic task ---------------------------------------------------------

// Threshold t with E[sigmoid(s (z - t))] = marginal for z ~ N(0, 1).
double soft_threshold(double marginal, double sharpness) {
  constexpr int kSteps = 4000;
  constexpr double kRange = 10.0;
  auto mean_inclusion = [&](double t) {
    double total = 0.0;
    const double h = 2.0 * kRange / kSteps;
    for (int i = 0; i <= kSteps; ++i) {
      double z = -kRange + i * h;
      double w = (i == 0 || i == kSteps) ? 0.5 : 1.0;
      total += w * std::exp(-0.5 * z * z) * sigmoid(sharpness * (z - t));
    }
    return total * h / std::sqrt(2.0 * std::numbers::pi);
  };
  double lo = -20.0, hi = 20.0 + 40.0 / sharpness;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (mean_inclusion(mid) > marginal ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SyntheticTask::SyntheticTask(const SyntheticTaskConfig& config) : config_(config) {
  const auto V = config.vocab_size;
  const auto d = config.feature_dim;
  const auto N = config.num_contexts;
  if (V == 0 || d == 0 || N < 2) throw std::invalid_argument("SyntheticTask: empty dimensions");
  if (!(config.head_marginal > 0.0 && config.head_marginal < 1.0)) {
    throw std::invalid_argument("SyntheticTask: head_marginal must lie in (0,1)");
  }
  if (!(config.label_sharpness > 0.0)) throw std::invalid_argument("SyntheticTask: label_sharpness must be > 0");
  if (!(config.zipf_exponent > 0.0)) throw std::invalid_argument("SyntheticTask: zipf_exponent must be > 0");
  if (!(config.noise_rate >= 0.0 && config.noise_rate <= 1.0)) {
    throw std::invalid_argument("SyntheticTask: noise_rate must lie in [0,1]");
  }
  if (!(config.heldout_fraction > 0.0 && config.heldout_fraction < 1.0)) {
    throw std::invalid_argument("SyntheticTask: heldout_fraction must lie in (0,1)");
  }
  auto heldout = static_cast<std::size_t>(std::llround(config.heldout_fraction * static_cast<double>(N)));
  heldout = std::clamp<std::size_t>(heldout, 1, N - 1);
  num_train_ = N - heldout;
  if (!(config.sft_fraction > 0.0 && config.sft_fraction < 1.0)) {
    throw std::invalid_argument("SyntheticTask: sft_fraction must lie in (0,1)");
  }
  if (num_train_ < 2) throw std::invalid_argument("SyntheticTask: too few training contexts");
  num_sft_ = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.sft_fraction * static_cast<double>(num_train_))), 1,
      num_train_ - 1);

  std::size_t width = std::to_string(V - 1).size();
  names_.reserve(V);
  for (std::size_t a = 0; a < V; ++a) {
    std::ostringstream os;
    os << "act" << std::setw(static_cast<int>(std::max<std::size_t>(width, 3))) << std::setfill('0') << a;
    names_.push_back(os.str());
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::mt19937_64 label_rng(mix_seed(config.seed, 1));
  std::vector<double> directions(V * d);
  std::vector<double> thresholds(V);
  marginals_.resize(V);
  for (std::size_t a = 0; a < V; ++a) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      directions[a * d + j] = normal(label_rng);
      norm += directions[a * d + j] * directions[a * d + j];
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < d; ++j) directions[a * d + j] /= norm;
    marginals_[a] = config.head_marginal * std::pow(static_cast<double>(a + 1), -config.zipf_exponent);
    thresholds[a] = std::isinf(config.label_sharpness) ? normal_quantile(1.0 - marginals_[a])
                                                        : soft_threshold(marginals_[a], config.label_sharpness);
  }

  std::mt19937_64 ctx_rng(mix_seed(config.seed, 2));
  contexts_.resize(N * d);
  for (auto& v : contexts_) v = normal(ctx_rng);

  std::mt19937_64 noise_rng(mix_seed(config.seed, 3));
  gold_.assign(N, LabelMask(V, 0));
  for (std::size_t c = 0; c < N; ++c) {
    auto x = context(c);
    for (std::size_t a = 0; a < V; ++a) {
      double u = uniform(noise_rng);
      double draw = uniform(noise_rng);
      bool on;
      if (u < config.noise_rate) {
        on = draw < marginals_[a];
      } else {
        double margin = dot(std::span<const double>(directions.data() + a * d, d), x) - thresholds[a];
        on = std::isinf(config.label_sharpness) ? margin > 0.0
                                                : draw < sigmoid(config.label_sharpness * margin);
      }
      gold_[c][a] = on ? 1 : 0;
    }
  }

  std::vector<corpus::VocabEntry> entries;
  for (std::size_t a = 0; a < V; ++a) {
    std::uint64_t count = 0;
    for (std::size_t c = 0; c < num_train_; ++c) count += gold_[c][a];
    entries.push_back({names_[a], count, corpus::Tier::mid});
  }
  corpus::Vocabulary vocab(LabelKind::action, std::move(entries));
  auto policy = corpus::default_tier_policy(vocab, config.head_top_k);
  vocab_ = corpus::assign_tiers(std::move(vocab), policy);
  inflections_ = extract::build_inflections(vocab_);
  tiers_.resize(V);
  for (std::size_t a = 0; a < V; ++a) tiers_[a] = *vocab_.tier(names_[a]);
}

std::span<const double> SyntheticTask::context(std::size_t c) const {
  return {contexts_.data() + c * config_.feature_dim, config_.feature_dim};
}

LabelSet SyntheticTask::to_label_set(const LabelMask& mask) const {
  LabelSet s(LabelKind::action);
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a]) s.insert(names_[a]);
  }
  return s;
}

// ---- groups and advantages --------------------------------------------------

std::vector<double> CandidateGroup::rewards() const {
  std::vector<double> r;
  r.reserve(candidates.size());
  for (const auto& c : candidates) r.push_back(c.reward.total);
  return r;
}

CandidateGroup sample_group(const ToyPolicy& policy, std::span<const double> context,
                            std::size_t group_size, std::uint64_t seed, std::size_t query) {
  if (group_size < 2) throw std::invalid_argument("sample_group: group size must be >= 2");
  auto z = policy.logits(context);
  std::vector<double> p(z.size());
  std::transform(z.begin(), z.end(), p.begin(), sigmoid);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  CandidateGroup group;
  group.query = query;
  group.candidates.resize(group_size);
  for (auto& cand : group.candidates) {
    cand.labels.assign(z.size(), 0);
    double lp = 0.0;
    for (std::size_t a = 0; a < z.size(); ++a) {
      cand.labels[a] = uniform(rng) < p[a] ? 1 : 0;
      lp += (cand.labels[a] ? z[a] : 0.0) - softplus(z[a]);
    }
    cand.old_log_prob = lp;
  }
  return group;
}

std::vector<double> normalize_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw std::invalid_argument("normalize_advantages: need at least two rewards");
  std::vector<double> adv(rewards.size(), 0.0);
  bool constant = std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; });
  if (constant) return adv;
  const double n = static_cast<double>(rewards.size());
  double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  double sd = std::sqrt(var / n);
  if (!(sd > 0.0)) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

std::string_view to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::f1_only: return "f1_only";
    case RewardMode::word_only: return "word_only";
    case RewardMode::combined: return "combined";
  }
  return "combined";
}

std::optional<RewardMode> parse_reward_mode(std::string_view text) {
  if (text == "f1_only") return RewardMode::f1_only;
  if (text == "word_only") return RewardMode::word_only;
  if (text == "combined") return RewardMode::combined;
  return std::nullopt;
}

std::string_view to_string(Optimizer optimizer) {
  return optimizer == Optimizer::adam ? "adam" : "sgd";
}

std::optional<Optimizer> parse_optimizer(std::string_view text) {
  if (text == "sgd") return Optimizer::sgd;
  if (text == "adam") return Optimizer::adam;
  return std::nullopt;
}

rewards::RewardWeights mode_weights(RewardMode mode, const rewards::RewardWeights& base) {
  auto w = base;
  if (mode == RewardMode::f1_only) w.gamma = 0.0;
  if (mode == RewardMode::word_only) w.alpha = 0.0;
  return w;
}

void GrpoConfig::validate() const {
  if (group_size < 2) throw std::invalid_argument("grpo config: group_size must be >= 2");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw std::invalid_argument("grpo config: clip_epsilon must lie in (0,1)");
  }
  if (!(kl_beta >= 0.0)) throw std::invalid_argument("grpo config: kl_beta must be >= 0");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("grpo config: learning_rate must be >= 0");
  if (queries_per_iteration == 0) throw std::invalid_argument("grpo config: queries_per_iteration must be > 0");
  if (refresh_interval == 0) throw std::invalid_argument("grpo config: refresh_interval must be > 0");
  if (eval_interval == 0) throw std::invalid_argument("grpo config: eval_interval must be > 0");
  reward_weights.validate();
  tier_weights.validate();
}

// ---- loss -------------------------------------------------------------------

LossResult grpo_loss(const ToyPolicy& policy, const ToyPolicy& old, const ToyPolicy& ref,
                     const CandidateGroup& group, std::span<const double> context,
                     const GrpoConfig& cfg) {
  const auto G = group.candidates.size();
  if (group.advantages.size() != G) throw std::invalid_argument("grpo_loss: advantages not filled");
  const auto V = policy.num_labels();
  auto z = policy.logits(context);
  auto z_old = old.logits(context);
  auto z_ref = ref.logits(context);

  std::vector<double> p(V), sp(V), sp_old(V);
  for (std::size_t a = 0; a < V; ++a) {
    p[a] = sigmoid(z[a]);
    sp[a] = softplus(z[a]);
    sp_old[a] = softplus(z_old[a]);
  }

  LossResult out;
  std::vector<double> dlogits(V, 0.0);
  const double lo = 1.0 - cfg.clip_epsilon, hi = 1.0 + cfg.clip_epsilon;
  std::size_t clipped = 0;
  for (std::size_t i = 0; i < G; ++i) {
    const auto& y = group.candidates[i].labels;
    double lp = 0.0, lp_old = 0.0;
    for (std::size_t a = 0; a < V; ++a) {
      lp += (y[a] ? z[a] : 0.0) - sp[a];
      lp_old += (y[a] ? z_old[a] : 0.0) - sp_old[a];
    }
    double rho = std::exp(lp - lp_old);
    double A = group.advantages[i];
    if (!std::isfinite(rho) || !std::isfinite(A)) {
      throw DivergenceError("grpo_loss: non-finite ratio or advantage for candidate " + std::to_string(i) +
                            " of query " + std::to_string(group.query));
    }
    double unclipped = rho * A;
    double clipped_value = std::clamp(rho, lo, hi) * A;
    if (unclipped <= clipped_value) {
      out.surrogate += unclipped;
      // d(rho A)/dz_a = A rho (y_a - p_a); loss carries -1/G.
      double scale = -A * rho / static_cast<double>(G);
      for (std::size_t a = 0; a < V; ++a) dlogits[a] += scale * ((y[a] ? 1.0 : 0.0) - p[a]);
    } else {
      out.surrogate += clipped_value;
      ++clipped;  // clamp is active here, so the term is constant in the parameters
    }
  }
  out.surrogate /= static_cast<double>(G);
  out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(G);

  out.kl = bernoulli_kl(z, z_ref);
  if (cfg.kl_beta != 0.0) {
    // dKL/dz_a = p_a (1 - p_a) (z_a - z_ref_a)
    for (std::size_t a = 0; a < V; ++a) dlogits[a] += cfg.kl_beta * p[a] * (1.0 - p[a]) * (z[a] - z_ref[a]);
  }
  out.loss = -out.surrogate + cfg.kl_beta * out.kl;
  if (!std::isfinite(out.loss)) {
    throw DivergenceError("grpo_loss: non-finite loss for query " + std::to_string(group.query));
  }
  out.gradient.assign(policy.num_params(), 0.0);
  policy.accumulate_gradient(dlogits, context, out.gradient);
  return out;
}

// ---- supervised warm start --------------------------------------------------

double training_log_likelihood(const ToyPolicy& policy, const SyntheticTask& task) {
  double total = 0.0;
  for (std::size_t c = 0; c < task.num_sft(); ++c) total += policy.log_prob(task.gold(c), task.context(c));
  return total / static_cast<double>(task.num_sft());
}

SftResult sft_warm_start(const ToyPolicy& policy, const SyntheticTask& task, std::size_t epochs,
                         double lr) {
  if (policy.num_labels() != task.num_labels() || policy.feature_dim() != task.feature_dim()) {
    throw std::invalid_argument("sft_warm_start: policy and task dimensions differ");
  }
  if (!(lr >= 0.0)) throw std::invalid_argument("sft_warm_start: lr must be >= 0");
  SftResult result{policy, {}};
  double objective = training_log_likelihood(result.policy, task);
  check_finite(objective, "sft_warm_start: initial log-likelihood");
  result.log_likelihood.push_back(objective);
  if (lr == 0.0) {
    result.log_likelihood.resize(epochs + 1, objective);
    return result;
  }

  // The objective is a sum of independent per-label logistic log-likelihoods,
  // so each label takes its own damped Newton step with backtracking.
  const std::size_t V = task.num_labels(), d = task.feature_dim(), n = task.num_sft();
  const double inv_n = 1.0 / static_cast<double>(n);
  using Vec = Eigen::VectorXd;
  using Mat = Eigen::MatrixXd;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> xs(
      task.context(0).data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));

  auto label_objective = [&](std::span<const double> row, std::size_t a) {
    double ll = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      auto x = task.context(c);
      double z = dot(row.first(d), x) + row[d];
      ll += (task.gold(c)[a] ? z : 0.0) - softplus(z);
    }
    return ll * inv_n;
  };

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    auto params = result.policy.params();
    for (std::size_t a = 0; a < V; ++a) {
      std::span<double> row = params.subspan(a * (d + 1), d + 1);
      Vec grad = Vec::Zero(static_cast<Eigen::Index>(d + 1));
      Mat hess = Mat::Zero(static_cast<Eigen::Index>(d + 1), static_cast<Eigen::Index>(d + 1));
      Vec xt(static_cast<Eigen::Index>(d + 1));
      double current = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        xt.head(static_cast<Eigen::Index>(d)) = xs.row(static_cast<Eigen::Index>(c)).transpose();
        xt(static_cast<Eigen::Index>(d)) = 1.0;
        double z = xt.dot(Eigen::Map<const Vec>(row.data(), static_cast<Eigen::Index>(d + 1)));
        double p = sigmoid(z);
        double y = task.gold(c)[a] ? 1.0 : 0.0;
        current += y * z - softplus(z);
        grad += (y - p) * xt;
        hess.noalias() += (p * (1.0 - p)) * xt * xt.transpose();
      }
      current *= inv_n;
      grad *= inv_n;
      hess *= inv_n;
      hess.diagonal().array() += 1e-8;
      Vec direction = hess.ldlt().solve(grad);
      if (!direction.allFinite()) {
        throw DivergenceError("sft_warm_start: non-finite Newton step for label " + std::to_string(a) +
                              " at epoch " + std::to_string(epoch));
      }
      std::vector<double> saved(row.begin(), row.end());
      double step = lr;
      bool accepted = false;
      for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
        for (std::size_t i = 0; i <= d; ++i) row[i] = saved[i] + step * direction(static_cast<Eigen::Index>(i));
        double value = label_objective(row, a);
        check_finite(value, "sft_warm_start: log-likelihood of label " + std::to_string(a));
        if (value >= current) {
          accepted = true;
        } else {
          step *= 0.5;
        }
      }
      if (!accepted) std::copy(saved.begin(), saved.end(), row.begin());
    }
    objective = training_log_likelihood(result.policy, task);
    check_finite(objective, "sft_warm_start: log-likelihood at epoch " + std::to_string(epoch));
    result.log_likelihood.push_back(objective);
  }
  return result;
}

// ---- training ---------------------------------------------------------------

LabelMask greedy_labels(const ToyPolicy& policy, std::span<const double> context) {
  auto z = policy.logits(context);
  LabelMask m(z.size(), 0);
  for (std::size_t a = 0; a < z.size(); ++a) m[a] = z[a] > 0.0 ? 1 : 0;
  return m;
}

std::string render_candidate(const LabelSet& labels) {
  return "<think>sampled</think><answer>" + join(labels.sorted(), ", ") + "</answer>";
}

HeldoutEval evaluate_heldout(const ToyPolicy& policy, const SyntheticTask& task, const GrpoConfig& cfg) {
  HeldoutEval ev;
  std::size_t tp = 0, fp = 0, fn = 0, predicted = 0;
  std::array<std::size_t, 3> ttp{}, tfp{}, tfn{};
  const std::size_t begin = task.num_train(), end = task.num_contexts();
  for (std::size_t c = begin; c < end; ++c) {
    auto pred = greedy_labels(policy, task.context(c));
    const auto& gold = task.gold(c);
    for (std::size_t a = 0; a < pred.size(); ++a) {
      auto t = static_cast<std::size_t>(task.tier(a));
      if (pred[a] && gold[a]) {
        ++tp;
        ++ttp[t];
      } else if (pred[a]) {
        ++fp;
        ++tfp[t];
      } else if (gold[a]) {
        ++fn;
        ++tfn[t];
      }
      predicted += pred[a];
    }
    auto r = rewards::action_reward(render_candidate(task.to_label_set(pred)), task.gold_set(c),
                                    task.vocabulary(), cfg.tier_weights, cfg.reward_weights,
                                    task.inflections());
    ev.mean_reward += r.total;
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  const double n = static_cast<double>(end - begin);
  ev.mean_reward /= n;
  ev.precision = ratio(tp, tp + fp);
  ev.recall = ratio(tp, tp + fn);
  ev.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  ev.fp_per_sample = static_cast<double>(fp) / n;
  ev.mean_predicted = static_cast<double>(predicted) / n;
  for (std::size_t t = 0; t < 3; ++t) {
    ev.tiers[t] = {ratio(ttp[t], ttp[t] + tfp[t]), ratio(ttp[t], ttp[t] + tfn[t]), ttp[t], tfp[t], tfn[t]};
  }
  return ev;
}

TrainResult train(const GrpoConfig& cfg, const SyntheticTask& task, RewardMode mode,
                  std::optional<ToyPolicy> initial,
                  const std::function<void(const TracePoint&)>& on_point) {
  cfg.validate();
  ToyPolicy policy;
  if (initial) {
    policy = std::move(*initial);
    if (policy.num_labels() != task.num_labels() || policy.feature_dim() != task.feature_dim()) {
      throw std::invalid_argument("train: initial policy does not match the task dimensions");
    }
  } else {
    policy = ToyPolicy::random(task.num_labels(), task.feature_dim(), mix_seed(cfg.seed, 7),
                               cfg.init_weight_scale, cfg.init_prob);
    if (cfg.warm_start_epochs > 0) {
      policy = sft_warm_start(policy, task, cfg.warm_start_epochs, cfg.warm_start_lr).policy;
    }
  }
  const ToyPolicy reference = policy;
  ToyPolicy old = policy;
  const auto weights = mode_weights(mode, cfg.reward_weights);
  Stepper stepper(cfg.optimizer, policy.num_params(), cfg.learning_rate);

  TrainResult result;
  const std::size_t Q = cfg.queries_per_iteration;
  std::vector<LossResult> losses(Q);
  std::vector<double> group_reward(Q);
  std::vector<std::size_t> queries(Q);

  for (std::size_t t = 0; t <= cfg.iterations; ++t) {
    const bool update = t < cfg.iterations;
    if (t % cfg.refresh_interval == 0) old = policy;

    std::mt19937_64 query_rng(mix_seed(cfg.seed, 11, t));
    std::uniform_int_distribution<std::size_t> pick(task.num_sft(), task.num_train() - 1);
    for (auto& q : queries) q = pick(query_rng);

    parallel_for(Q, cfg.jobs, [&](std::size_t k) {
      auto x = task.context(queries[k]);
      auto group = sample_group(old, x, cfg.group_size, mix_seed(mix_seed(cfg.seed, 13, t), k), queries[k]);
      auto gold = task.gold_set(queries[k]);
      double sum = 0.0;
      for (auto& cand : group.candidates) {
        cand.reward = rewards::action_reward(render_candidate(task.to_label_set(cand.labels)), gold,
                                             task.vocabulary(), cfg.tier_weights, weights,
                                             task.inflections());
        sum += cand.reward.total;
      }
      group_reward[k] = sum / static_cast<double>(group.candidates.size());
      group.advantages = normalize_advantages(group.rewards());
      if (update) losses[k] = grpo_loss(policy, old, reference, group, x, cfg);
    });

    TracePoint point;
    point.iteration = t;
    for (std::size_t k = 0; k < Q; ++k) point.mean_reward += group_reward[k];
    point.mean_reward /= static_cast<double>(Q);
    if (t % cfg.eval_interval == 0 || !update) point.heldout = evaluate_heldout(policy, task, cfg);

    if (update) {
      std::vector<double> grad(policy.num_params(), 0.0);
      for (std::size_t k = 0; k < Q; ++k) {
        point.loss += losses[k].loss;
        point.kl += losses[k].kl;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += losses[k].gradient[i];
      }
      point.loss /= static_cast<double>(Q);
      point.kl /= static_cast<double>(Q);
      for (auto& g : grad) g /= static_cast<double>(Q);
      stepper.step(policy.params(), grad);
      bool finite = std::all_of(policy.params().begin(), policy.params().end(),
                                [](double v) { return std::isfinite(v); });
      if (!finite) {
        throw DivergenceError("train: parameters diverged at iteration " + std::to_string(t) +
                              "; last good parameters are those after iteration " +
                              std::to_string(t == 0 ? 0 : t - 1));
      }
    }
    if (on_point) on_point(point);
    result.trace.push_back(std::move(point));
  }
  result.final_eval = *result.trace.back().heldout;
  result.policy = std::move(policy);
  result.reference = reference;
  return result;
}

std::string trace_line(const TracePoint& point) {
  nlohmann::ordered_json j;
  j["iteration"] = point.iteration;
  j["mean_reward"] = point.mean_reward;
  j["loss"] = point.loss;
  j["kl"] = point.kl;
  if (point.heldout) {
    const auto& h = *point.heldout;
    nlohmann::ordered_json e;
    e["mean_reward"] = h.mean_reward;
    e["precision"] = h.precision;
    e["recall"] = h.recall;
    e["f1"] = h.f1;
    e["fp_per_sample"] = h.fp_per_sample;
    e["mean_predicted"] = h.mean_predicted;
    for (std::size_t t = 0; t < 3; ++t) {
      nlohmann::ordered_json tier;
      tier["precision"] = h.tiers[t].precision;
      tier["recall"] = h.tiers[t].recall;
      tier["tp"] = h.tiers[t].tp;
      tier["fp"] = h.tiers[t].fp;
      tier["fn"] = h.tiers[t].fn;
      e[std::string(corpus::to_string(static_cast<corpus::Tier>(t)))] = std::move(tier);
    }
    j["heldout"] = std::move(e);
  }
  return j.dump();
}

// ---- config -----------------------------------------------------------------

void apply_config(std::istream& in, GrpoConfig& cfg, SyntheticTaskConfig& task) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw DataError("config line " + std::to_string(n) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    auto where = "config line " + std::to_string(n) + " ('" + key + "')";
    auto as_double = [&] {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size() || value.empty()) throw DataError(where + ": expected a number");
      return v;
    };
    auto as_size = [&]() -> std::uint64_t {
      std::size_t used = 0;
      std::uint64_t v = 0;
      try {
        if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
        v = std::stoull(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size() || value.empty()) throw DataError(where + ": expected a nonnegative integer");
      return v;
    };
    auto& rw = cfg.reward_weights;
    auto& tw = cfg.tier_weights;
    if (key == "group_size" || key == "G") cfg.group_size = as_size();
    else if (key == "clip_epsilon") cfg.clip_epsilon = as_double();
    else if (key == "kl_beta") cfg.kl_beta = as_double();
    else if (key == "learning_rate") cfg.learning_rate = as_double();
    else if (key == "optimizer") {
      auto o = parse_optimizer(value);
      if (!o) throw DataError(where + ": expected sgd or adam");
      cfg.optimizer = *o;
    }
    else if (key == "iterations") cfg.iterations = as_size();
    else if (key == "queries_per_iteration") cfg.queries_per_iteration = as_size();
    else if (key == "refresh_interval") cfg.refresh_interval = as_size();
    else if (key == "eval_interval") cfg.eval_interval = as_size();
    else if (key == "seed") cfg.seed = as_size();
    else if (key == "init_weight_scale") cfg.init_weight_scale = as_double();
    else if (key == "init_prob") cfg.init_prob = as_double();
    else if (key == "warm_start_epochs") cfg.warm_start_epochs = as_size();
    else if (key == "warm_start_lr") cfg.warm_start_lr = as_double();
    else if (key == "alpha") rw.alpha = as_double();
    else if (key == "beta") rw.beta = as_double();
    else if (key == "gamma") rw.gamma = as_double();
    else if (key == "epsilon") rw.epsilon = as_double();
    else if (key == "tp_head") tw.tp[0] = as_double();
    else if (key == "tp_mid") tw.tp[1] = as_double();
    else if (key == "tp_tail") tw.tp[2] = as_double();
    else if (key == "fn_head") tw.fn[0] = as_double();
    else if (key == "fn_mid") tw.fn[1] = as_double();
    else if (key == "fn_tail") tw.fn[2] = as_double();
    else if (key == "fp_penalty") tw.fp_penalty = as_double();
    else if (key == "vocab_size") task.vocab_size = as_size();
    else if (key == "feature_dim") task.feature_dim = as_size();
    else if (key == "zipf_exponent") task.zipf_exponent = as_double();
    else if (key == "head_marginal") task.head_marginal = as_double();
    else if (key == "noise_rate") task.noise_rate = as_double();
    else if (key == "label_sharpness") task.label_sharpness = as_double();
    else if (key == "num_contexts") task.num_contexts = as_size();
    else if (key == "heldout_fraction") task.heldout_fraction = as_double();
    else if (key == "sft_fraction") task.sft_fraction = as_double();
    else if (key == "task_seed") task.seed = as_size();
    else if (key == "head_top_k") task.head_top_k = as_size();
    else throw DataError(where + ": unknown key");
  }
}

void apply_config_file(const std::string& path, GrpoConfig& cfg, SyntheticTaskConfig& task) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  try {
    apply_config(in, cfg, task);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace sgr::grpo
