// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#include "sgr/label_set.hpp"

#include <algorithm>
#include <iterator>

namespace sgr {

std::string_view to_string(LabelKind kind) {
  return kind == LabelKind::action ? "action" : "ingredient";
}

std::optional<LabelKind> parse_label_kind(std::string_view text) {
  if (text == "action" || text == "actions") return LabelKind::action;
  if (text == "ingredient" || text == "ingredients") return LabelKind::ingredient;
  return std::nullopt;
}

LabelSet::LabelSet(std::initializer_list<std::string_view> labels, LabelKind kind) : kind_(kind) {
  for (auto l : labels) insert(l);
}

void LabelSet::insert(std::string_view label) {
  auto c = canonicalize(label);
  if (!c.empty()) labels_.insert(std::move(c));
}

LabelSet intersect(const LabelSet& a, const LabelSet& b) {
  LabelSet out(a.kind());
  for (const auto& l : a) {
    if (b.contains(l)) out.insert(l);
  }
  return out;
}

LabelSet subtract(const LabelSet& a, const LabelSet& b) {
  LabelSet out(a.kind());
  for (const auto& l : a) {
    if (!b.contains(l)) out.insert(l);
  }
  return out;
}

}  // namespace sgr
