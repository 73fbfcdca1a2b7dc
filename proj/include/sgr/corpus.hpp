// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0
//
// Recipe corpora, label vocabularies with frequency tiers, long-tail and
// confidence filters, and the action-ingredient context prompt.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sgr/label_set.hpp"

namespace sgr::corpus {

struct RecipeSample {
  std::string id;
  std::string title;
  std::vector<std::string> ingredients;   // canonical, unique, input order
  std::vector<std::string> instructions;  // step strings, verbatim
  std::vector<std::string> actions;       // canonical, unique, input order
  std::optional<std::string> cot;
  std::optional<double> cot_confidence;

  const std::vector<std::string>& labels(LabelKind kind) const {
    return kind == LabelKind::action ? actions : ingredients;
  }
  bool operator==(const RecipeSample&) const = default;
};

// Canonicalizes every label in place and removes duplicates (first occurrence wins).
void normalize_labels(RecipeSample& sample);

enum class Tier { head = 0, mid = 1, tail = 2 };
std::string_view to_string(Tier tier);
std::optional<Tier> parse_tier(std::string_view text);

struct VocabEntry {
  std::string label;
  std::uint64_t count = 0;
  Tier tier = Tier::mid;
  bool operator==(const VocabEntry&) const = default;
};

// Entries are sorted by descending count, ties by ascending label; rank is the
// 1-based position in that order.
class Vocabulary {
 public:
  Vocabulary() = default;
  // Sorts the entries and rebuilds the index. Throws DataError on duplicate labels.
  Vocabulary(LabelKind kind, std::vector<VocabEntry> entries);

  LabelKind kind() const { return kind_; }
  const std::vector<VocabEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const VocabEntry* find(std::string_view canonical_label) const;
  std::optional<std::size_t> rank(std::string_view canonical_label) const;
  std::optional<Tier> tier(std::string_view canonical_label) const;

  void set_tier(std::size_t index, Tier tier) { entries_[index].tier = tier; }

  bool operator==(const Vocabulary& other) const {
    return kind_ == other.kind_ && entries_ == other.entries_;
  }

 private:
  LabelKind kind_ = LabelKind::action;
  std::vector<VocabEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TierPolicy {
  std::size_t head_top_k = 55;
  std::uint64_t tail_max_count = 0;
};

// Default policy: head_top_k = 55, tail_max_count = lower median (nearest-rank
// 50th percentile) of the counts of labels ranked below the head cutoff.
TierPolicy default_tier_policy(const Vocabulary& vocab, std::size_t head_top_k = 55);

// Document frequency of each canonical label, tiered with default_tier_policy().
// Throws EmptyInputError on an empty corpus.
Vocabulary build_vocabulary(std::span<const RecipeSample> corpus, LabelKind kind);

// Head iff rank <= head_top_k; tail iff not head and count <= tail_max_count; mid otherwise.
Vocabulary assign_tiers(Vocabulary vocab, const TierPolicy& policy);

struct FilterResult {
  std::vector<RecipeSample> kept;
  std::size_t dropped = 0;
  std::size_t skipped = 0;  // empty action list / missing confidence
};

// Keeps samples with at least one action outside the top_k most frequent labels
// of `vocab`. Labels missing from the vocabulary count as outside.
FilterResult filter_longtail(std::span<const RecipeSample> corpus, const Vocabulary& vocab,
                             std::size_t top_k);

// Keeps samples with cot_confidence strictly above `threshold`.
FilterResult filter_by_confidence(std::span<const RecipeSample> corpus, double threshold);

std::string build_context_prompt(const LabelSet& actions, const LabelSet& ingredients);

// ---- file formats -----------------------------------------------------------

struct ReadOptions {
  bool require_actions = false;
  bool require_ingredients = false;
};

// One JSON object per line. Blank lines are skipped. Throws DataError naming
// the line number (and sample id when known) for malformed records or duplicate ids.
std::vector<RecipeSample> read_corpus(std::istream& in, const ReadOptions& options = {});
std::vector<RecipeSample> read_corpus_file(const std::string& path, const ReadOptions& options = {});
void write_corpus(std::ostream& out, std::span<const RecipeSample> corpus);
std::string to_json_line(const RecipeSample& sample);

Vocabulary read_vocabulary(std::istream& in);
Vocabulary read_vocabulary_file(const std::string& path);
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);

}  // namespace sgr::corpus
