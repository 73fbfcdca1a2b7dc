// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0
//
// Set metrics over predicted and gold label sets, token-level ROUGE-L, corpus
// evaluation reports and the lexical-versus-semantic corruption probe.

#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sgr/corpus.hpp"
#include "sgr/extract.hpp"
#include "sgr/label_set.hpp"

namespace sgr::metrics {

struct SetMetrics {
  double f1 = 0.0;
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Both sets empty counts as perfect agreement (all four scores 1).
SetMetrics set_metrics(const LabelSet& pred, const LabelSet& gold);
SetMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

// F-measure (beta = 1) of the token LCS over canonical whitespace tokens.
double rouge_l(std::string_view candidate, std::string_view reference);
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// A prediction or reference record: {"id", "text"} or a recipe record whose
// "instructions" array is joined with single spaces.
struct TextRecord {
  std::string id;
  std::string text;
};
std::vector<TextRecord> read_text_records(std::istream& in, const std::string& source);
std::vector<TextRecord> read_text_records_file(const std::string& path);

struct SampleReport {
  std::string id;
  SetMetrics action;
  SetMetrics ingredient;
  double rouge_l = 0.0;
};

struct Aggregate {
  double f1 = 0.0, iou = 0.0, precision = 0.0, recall = 0.0;
};

struct EvalReport {
  std::vector<SampleReport> samples;  // sorted by id
  Aggregate macro_action, macro_ingredient;
  double macro_rouge_l = 0.0;
  SetMetrics micro_action, micro_ingredient;
  std::size_t num_predictions = 0, num_references = 0;
  nlohmann::ordered_json config;  // echoed verbatim into the report
};

struct Extractors {
  const extract::InflectionTable& actions;
  const extract::IngredientMatcher& ingredients;
};

// Joins predictions and references on id. Throws DataError listing orphan ids
// on either side, or naming a duplicated id.
EvalReport evaluate_corpus(const std::vector<TextRecord>& preds, const std::vector<TextRecord>& refs,
                           const Extractors& extractors, unsigned jobs = 1);

nlohmann::ordered_json to_json(const SetMetrics& m);
nlohmann::ordered_json to_json(const EvalReport& report);

enum class ProbeMode { swap_ingredients, swap_actions };
std::string_view to_string(ProbeMode mode);
std::optional<ProbeMode> parse_probe_mode(std::string_view text);

// label -> replacement; read from `label<TAB>replacement` lines.
using SubstitutionTable = std::map<std::string, std::string>;
SubstitutionTable read_substitutions(std::istream& in, const std::string& source);
SubstitutionTable read_substitutions_file(const std::string& path);

struct ProbeResult {
  std::string corrupted;
  std::size_t substitutions = 0;  // replaced mentions
  double rouge_l = 0.0;           // corrupted vs reference
  SetMetrics action;              // labels of the corrupted text vs labels of the reference
  SetMetrics ingredient;
  // Differences against the uncorrupted reference scored against itself.
  double delta_rouge_l = 0.0;
  double delta_action_f1 = 0.0;
  double delta_ingredient_f1 = 0.0;
};

// Rewrites every mention of every reference label of the chosen kind that has
// an entry in `table`. Punctuation glued to a mention is kept. Throws
// DataError when the table is empty, when no mention can be substituted, or
// when a replacement already occurs among the reference labels.
ProbeResult corruption_probe(std::string_view reference, ProbeMode mode, const SubstitutionTable& table,
                             const Extractors& extractors);

nlohmann::ordered_json to_json(const ProbeResult& result);

}  // namespace sgr::metrics
