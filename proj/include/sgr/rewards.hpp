// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-label rewards for action and ingredient prediction: set F1, the
// frequency-tiered word-level reward, the <think>/<answer> format reward and
// the weighted composite action reward.

#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgr/corpus.hpp"
#include "sgr/extract.hpp"
#include "sgr/label_set.hpp"

namespace sgr::rewards {

using corpus::Tier;

// Per-tier weights indexed by Tier.
struct TierWeights {
  std::array<double, 3> tp{0.1, 0.5, 1.5};   // head, mid, tail
  std::array<double, 3> fn{0.05, 0.3, 1.2};  // head, mid, tail
  double fp_penalty = 0.2;

  double tp_weight(Tier t) const { return tp[static_cast<std::size_t>(t)]; }
  double fn_weight(Tier t) const { return fn[static_cast<std::size_t>(t)]; }
  // Throws std::invalid_argument on negative or non-finite weights.
  void validate() const;
};

// {"tp": {"head":..,"mid":..,"tail":..}, "fn": {...}, "fp_penalty": ..}; missing keys keep defaults.
TierWeights read_tier_weights(std::istream& in);
TierWeights read_tier_weights_file(const std::string& path);

struct RewardWeights {
  double alpha = 0.1;
  double beta = 1.0;
  double gamma = 1.0;
  double epsilon = 1e-8;
  void validate() const;
};

struct RewardBreakdown {
  double f1 = 0.0;
  double word = 0.0;
  double format = 0.0;
  double total = 0.0;
  std::vector<std::string> tp, fp, fn;
};

// 2PR / (P + R + epsilon); 0 when either set is empty.
double f1_reward(const LabelSet& pred, const LabelSet& gold, double epsilon = 1e-8);

inline double ingredient_reward(const LabelSet& pred, const LabelSet& gold, double epsilon = 1e-8) {
  return f1_reward(pred, gold, epsilon);
}

// Sum of tier-weighted TP credit minus a flat FP penalty minus tier-weighted FN
// cost. Predictions absent from the vocabulary are false positives. Throws
// std::invalid_argument when a gold label is absent from the vocabulary.
double word_level_reward(const LabelSet& pred, const LabelSet& gold, const corpus::Vocabulary& vocab,
                         const TierWeights& weights = {});

// Span of the <answer> body that satisfies ^<think>.*?</think>\s*<answer>.*?</answer>
// (dot matches newline), or nullopt.
std::optional<std::string_view> match_format(std::string_view output);

inline double format_reward(std::string_view output) { return match_format(output) ? 1.0 : 0.0; }

inline double composite_total(const RewardWeights& rw, double f1, double format, double word) {
  return rw.alpha * f1 + rw.beta * format + rw.gamma * word;
}

// Extracts predicted actions from the <answer> span when the format matches,
// otherwise from the whole output, and scores them against `gold`.
RewardBreakdown action_reward(std::string_view output, const LabelSet& gold,
                              const corpus::Vocabulary& vocab, const TierWeights& tw,
                              const RewardWeights& rw, const extract::InflectionTable& table);

// Same scoring for an already extracted prediction set with a known format bit.
RewardBreakdown score_labels(const LabelSet& pred, const LabelSet& gold, double format,
                             const corpus::Vocabulary& vocab, const TierWeights& tw,
                             const RewardWeights& rw);

}  // namespace sgr::rewards
