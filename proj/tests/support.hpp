// Independent oracles shared by the unit tests and the acceptance run.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "sgr/grpo.hpp"
#include "sgr/label_set.hpp"
#include "sgr/metrics.hpp"

namespace sgr::testing {

// One random GRPO instance: a group sampled from `old`, a perturbed current
// policy, an unrelated reference and arbitrary advantages.
struct GradInstance {
  grpo::ToyPolicy policy, old, ref;
  std::vector<double> context;
  grpo::CandidateGroup group;
  grpo::GrpoConfig cfg;
};

inline GradInstance random_grad_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> labels(1, 10), dims(1, 4), groups(2, 8);
  std::normal_distribution<double> normal(0.0, 1.0);
  GradInstance g;
  std::size_t v = labels(rng), d = dims(rng);
  g.old = grpo::ToyPolicy::random(v, d, rng(), 0.8, 0.4);
  g.ref = grpo::ToyPolicy::random(v, d, rng(), 0.8, 0.6);
  g.policy = g.old;
  for (auto& p : g.policy.params()) p += 0.15 * normal(rng);
  g.context.resize(d);
  for (auto& x : g.context) x = normal(rng);
  g.group = grpo::sample_group(g.old, g.context, groups(rng), rng());
  for (std::size_t i = 0; i < g.group.candidates.size(); ++i) g.group.advantages.push_back(normal(rng));
  g.cfg.kl_beta = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
  g.cfg.clip_epsilon = 0.2;
  return g;
}

// Largest componentwise relative error between the analytic gradient and
// central differences with step h. Components where both are below `floor`
// are compared against `floor`.
inline double gradient_check(const GradInstance& g, double h = 1e-5, double floor = 1e-6) {
  auto analytic = grpo::grpo_loss(g.policy, g.old, g.ref, g.group, g.context, g.cfg).gradient;
  grpo::ToyPolicy probe = g.policy;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.num_params(); ++i) {
    const double saved = probe.params()[i];
    probe.params()[i] = saved + h;
    double up = grpo::grpo_loss(probe, g.old, g.ref, g.group, g.context, g.cfg).loss;
    probe.params()[i] = saved - h;
    double down = grpo::grpo_loss(probe, g.old, g.ref, g.group, g.context, g.cfg).loss;
    probe.params()[i] = saved;
    double numeric = (up - down) / (2.0 * h);
    double scale = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

// Set metrics by direct membership tests over the union.
inline metrics::SetMetrics brute_force_metrics(const std::vector<std::string>& pred,
                                               const std::vector<std::string>& gold) {
  std::vector<std::string> all = pred;
  all.insert(all.end(), gold.begin(), gold.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  auto in = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  double tp = 0, fp = 0, fn = 0;
  for (const auto& s : all) {
    bool p = in(pred, s), g = in(gold, s);
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  metrics::SetMetrics m;
  m.tp = static_cast<std::size_t>(tp);
  m.fp = static_cast<std::size_t>(fp);
  m.fn = static_cast<std::size_t>(fn);
  if (all.empty()) {
    m.precision = m.recall = m.f1 = m.iou = 1.0;
    return m;
  }
  m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.iou = tp / static_cast<double>(all.size());
  return m;
}

// Suffix-table LCS filled back to front.
inline std::size_t lcs_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = a.size(); i-- > 0;) {
    for (std::size_t j = b.size(); j-- > 0;) {
      t[i][j] = a[i] == b[j] ? 1 + t[i + 1][j + 1] : std::max(t[i + 1][j], t[i][j + 1]);
    }
  }
  return t[0][0];
}

inline double rouge_oracle(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  double l = static_cast<double>(lcs_oracle(cand, ref));
  if (l == 0.0) return 0.0;
  double p = l / cand.size(), r = l / ref.size();
  return 2 * p * r / (p + r);
}

}  // namespace sgr::testing
