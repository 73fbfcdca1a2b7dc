// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sgr/text.hpp"

namespace sgr {

enum class LabelKind { action, ingredient };

std::string_view to_string(LabelKind kind);
std::optional<LabelKind> parse_label_kind(std::string_view text);

// Set of canonical labels of one kind. Insertion canonicalizes; labels that
// canonicalize to the empty string are ignored.
class LabelSet {
 public:
  using const_iterator = std::set<std::string>::const_iterator;

  LabelSet() = default;
  explicit LabelSet(LabelKind kind) : kind_(kind) {}
  LabelSet(std::initializer_list<std::string_view> labels, LabelKind kind = LabelKind::action);
  template <typename Range>
  static LabelSet from(const Range& labels, LabelKind kind = LabelKind::action) {
    LabelSet s(kind);
    for (const auto& l : labels) s.insert(l);
    return s;
  }

  void insert(std::string_view label);
  bool erase(std::string_view canonical_label) { return labels_.erase(std::string(canonical_label)) > 0; }
  bool contains(std::string_view canonical_label) const {
    return labels_.find(std::string(canonical_label)) != labels_.end();
  }

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const_iterator begin() const { return labels_.begin(); }
  const_iterator end() const { return labels_.end(); }

  LabelKind kind() const { return kind_; }
  const std::set<std::string>& labels() const { return labels_; }
  std::vector<std::string> sorted() const { return {labels_.begin(), labels_.end()}; }

  bool operator==(const LabelSet& other) const = default;

 private:
  LabelKind kind_ = LabelKind::action;
  std::set<std::string> labels_;
};

// Set algebra over canonical labels. Results take the kind of `a`.
LabelSet intersect(const LabelSet& a, const LabelSet& b);
LabelSet subtract(const LabelSet& a, const LabelSet& b);

}  // namespace sgr
