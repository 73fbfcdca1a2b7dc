// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0
//
// Lexicon-based extraction of canonical action and ingredient labels from
// free-form instruction text.

#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sgr/corpus.hpp"
#include "sgr/label_set.hpp"

namespace sgr::extract {

// Surface form -> canonical verb.
class InflectionTable {
 public:
  // Adds surface -> canonical only if surface is not yet mapped.
  bool add(std::string surface, std::string canonical);
  // Adds or replaces a mapping.
  void set(std::string surface, std::string canonical);
  const std::string* lookup(std::string_view surface) const;
  std::size_t size() const { return map_.size(); }
  const std::unordered_map<std::string, std::string>& map() const { return map_; }

 private:
  std::unordered_map<std::string, std::string> map_;
};

// Regular English inflections of a single verb (excluding the verb itself):
// third person (+s/+es, consonant+y -> ies), past (+ed/+d, doubling, y -> ied),
// present participle (+ing, doubling, drop final e).
std::vector<std::string> inflect(std::string_view verb);

// Every vocabulary verb maps to itself; generated forms are added in vocabulary
// rank order so collisions resolve toward the more frequent verb.
InflectionTable build_inflections(const corpus::Vocabulary& actions);

// Merges `surface<TAB>canonical` lines (blank lines and '#' comments skipped)
// over the table, replacing generated mappings. Throws DataError on bad lines.
void merge_overrides(InflectionTable& table, std::istream& in);
void merge_overrides_file(InflectionTable& table, const std::string& path);

LabelSet extract_actions(std::string_view text, const InflectionTable& table);

// Multi-word gazetteer over whole canonical tokens.
class IngredientMatcher {
 public:
  explicit IngredientMatcher(const corpus::Vocabulary& ingredients);

  struct Match {
    std::size_t start = 0;  // token index
    std::size_t length = 0;
    std::string label;
  };
  // Non-overlapping matches chosen longest-first, then leftmost; sorted by start.
  std::vector<Match> match(const std::vector<std::string>& tokens) const;
  LabelSet extract(std::string_view text) const;

 private:
  std::unordered_map<std::string, std::size_t> labels_;  // label -> token count
  std::size_t max_len_ = 0;
};

LabelSet extract_ingredients(std::string_view text, const corpus::Vocabulary& ingredients);

}  // namespace sgr::extract
