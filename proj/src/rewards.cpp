// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#include "sgr/rewards.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <stdexcept>

#include <json.hpp>

#include "sgr/errors.hpp"

namespace sgr::rewards {

using json = nlohmann::json;

void TierWeights::validate() const {
  auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
  for (double v : tp) {
    if (!ok(v)) throw std::invalid_argument("tier weights: tp weights must be finite and >= 0");
  }
  for (double v : fn) {
    if (!ok(v)) throw std::invalid_argument("tier weights: fn weights must be finite and >= 0");
  }
  if (!ok(fp_penalty)) throw std::invalid_argument("tier weights: fp_penalty must be finite and >= 0");
}

TierWeights read_tier_weights(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("tier weights: invalid JSON: ") + e.what());
  }
  TierWeights w;
  auto read_map = [&](const char* key, std::array<double, 3>& dst) {
    if (!doc.contains(key)) return;
    const auto& m = doc[key];
    if (!m.is_object()) throw DataError(std::string("tier weights: '") + key + "' must be an object");
    for (auto& [name, value] : m.items()) {
      auto tier = corpus::parse_tier(name);
      if (!tier || !value.is_number()) {
        throw DataError(std::string("tier weights: bad entry '") + name + "' in '" + key + "'");
      }
      dst[static_cast<std::size_t>(*tier)] = value.get<double>();
    }
  };
  if (!doc.is_object()) throw DataError("tier weights: expected a JSON object");
  read_map("tp", w.tp);
  read_map("fn", w.fn);
  if (doc.contains("fp_penalty")) {
    if (!doc["fp_penalty"].is_number()) throw DataError("tier weights: fp_penalty must be a number");
    w.fp_penalty = doc["fp_penalty"].get<double>();
  }
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return w;
}

TierWeights read_tier_weights_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tier weights file '" + path + "'");
  return read_tier_weights(in);
}

void RewardWeights::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("reward weights: epsilon must be > 0");
  if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma)) {
    throw std::invalid_argument("reward weights: alpha, beta, gamma must be finite");
  }
}

double f1_reward(const LabelSet& pred, const LabelSet& gold, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("f1_reward: epsilon must be > 0");
  if (pred.empty() || gold.empty()) return 0.0;
  double tp = static_cast<double>(intersect(pred, gold).size());
  double p = tp / static_cast<double>(pred.size());
  double r = tp / static_cast<double>(gold.size());
  return 2.0 * p * r / (p + r + epsilon);
}

double word_level_reward(const LabelSet& pred, const LabelSet& gold, const corpus::Vocabulary& vocab,
                         const TierWeights& weights) {
  double reward = 0.0;
  for (const auto& g : gold) {
    auto tier = vocab.tier(g);
    if (!tier) throw std::invalid_argument("word_level_reward: gold label '" + g + "' not in vocabulary");
    reward += pred.contains(g) ? weights.tp_weight(*tier) : -weights.fn_weight(*tier);
  }
  for (const auto& p : pred) {
    if (!gold.contains(p)) reward -= weights.fp_penalty;
  }
  return reward;
}

std::optional<std::string_view> match_format(std::string_view output) {
  constexpr std::string_view open_think = "<think>";
  constexpr std::string_view close_think = "</think>";
  constexpr std::string_view open_answer = "<answer>";
  constexpr std::string_view close_answer = "</answer>";
  if (output.substr(0, open_think.size()) != open_think) return std::nullopt;

  // The lazy .*? may extend past any </think> that is not followed by
  // \s*<answer>...</answer>, so every closing tag is a candidate.
  auto close = output.find(close_think, open_think.size());
  while (close != std::string_view::npos) {
    auto pos = close + close_think.size();
    while (pos < output.size() && (output[pos] == ' ' || output[pos] == '\t' || output[pos] == '\n' ||
                                   output[pos] == '\r' || output[pos] == '\f' || output[pos] == '\v')) {
      ++pos;
    }
    if (output.substr(pos, open_answer.size()) == open_answer) {
      auto body = pos + open_answer.size();
      auto end = output.find(close_answer, body);
      if (end != std::string_view::npos) return output.substr(body, end - body);
      return std::nullopt;  // no later </think> can supply a closing </answer> either
    }
    close = output.find(close_think, close + 1);
  }
  return std::nullopt;
}

RewardBreakdown score_labels(const LabelSet& pred, const LabelSet& gold, double format,
                             const corpus::Vocabulary& vocab, const TierWeights& tw,
                             const RewardWeights& rw) {
  RewardBreakdown b;
  b.f1 = f1_reward(pred, gold, rw.epsilon);
  b.word = word_level_reward(pred, gold, vocab, tw);
  b.format = format;
  b.total = composite_total(rw, b.f1, b.format, b.word);
  b.tp = intersect(pred, gold).sorted();
  b.fp = subtract(pred, gold).sorted();
  b.fn = subtract(gold, pred).sorted();
  return b;
}

RewardBreakdown action_reward(std::string_view output, const LabelSet& gold,
                              const corpus::Vocabulary& vocab, const TierWeights& tw,
                              const RewardWeights& rw, const extract::InflectionTable& table) {
  auto answer = match_format(output);
  auto pred = extract::extract_actions(answer ? *answer : output, table);
  return score_labels(pred, gold, answer ? 1.0 : 0.0, vocab, tw, rw);
}

}  // namespace sgr::rewards
