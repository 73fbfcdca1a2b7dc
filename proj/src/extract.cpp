// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#include "sgr/extract.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

#include "sgr/errors.hpp"

namespace sgr::extract {
namespace {

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }
bool is_letter(char c) { return c >= 'a' && c <= 'z'; }
bool is_consonant(char c) { return is_letter(c) && !is_vowel(c); }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::size_t vowel_groups(std::string_view w) {
  std::size_t groups = 0;
  bool in_group = false;
  for (char c : w) {
    bool v = is_vowel(c) || c == 'y';
    if (v && !in_group) ++groups;
    in_group = v;
  }
  return groups;
}

// Single-syllable consonant-vowel-consonant verbs double their final consonant
// (chop -> chopping, stir -> stirred). w, x and y never double.
bool doubles_final(std::string_view w) {
  if (w.size() < 3) return false;
  char last = w[w.size() - 1];
  char mid = w[w.size() - 2];
  char first = w[w.size() - 3];
  if (!is_consonant(last) || last == 'w' || last == 'x' || last == 'y') return false;
  if (!is_vowel(mid) || is_vowel(first)) return false;
  return vowel_groups(w) == 1;
}

}  // namespace

bool InflectionTable::add(std::string surface, std::string canonical) {
  return map_.emplace(std::move(surface), std::move(canonical)).second;
}

void InflectionTable::set(std::string surface, std::string canonical) {
  map_[std::move(surface)] = std::move(canonical);
}

const std::string* InflectionTable::lookup(std::string_view surface) const {
  auto it = map_.find(std::string(surface));
  return it == map_.end() ? nullptr : &it->second;
}

std::vector<std::string> inflect(std::string_view verb) {
  std::string v(verb);
  std::vector<std::string> forms;
  if (v.empty() || v.find(' ') != std::string::npos) return forms;

  bool consonant_y = v.size() >= 2 && v.back() == 'y' && is_consonant(v[v.size() - 2]);
  std::string stem_y = consonant_y ? v.substr(0, v.size() - 1) : "";

  // third person singular
  if (consonant_y) {
    forms.push_back(stem_y + "ies");
  } else if (ends_with(v, "s") || ends_with(v, "x") || ends_with(v, "z") || ends_with(v, "ch") ||
             ends_with(v, "sh") || ends_with(v, "o")) {
    forms.push_back(v + "es");
  } else {
    forms.push_back(v + "s");
  }

  // past tense / participle
  if (consonant_y) {
    forms.push_back(stem_y + "ied");
  } else if (v.back() == 'e') {
    forms.push_back(v + "d");
  } else if (doubles_final(v)) {
    forms.push_back(v + v.back() + "ed");
  } else {
    forms.push_back(v + "ed");
  }

  // present participle
  if (v.back() == 'e' && !ends_with(v, "ee") && v.size() > 2) {
    forms.push_back(v.substr(0, v.size() - 1) + "ing");
  } else if (doubles_final(v)) {
    forms.push_back(v + v.back() + "ing");
  } else {
    forms.push_back(v + "ing");
  }
  return forms;
}

InflectionTable build_inflections(const corpus::Vocabulary& actions) {
  InflectionTable table;
  for (const auto& e : actions.entries()) table.set(e.label, e.label);
  for (const auto& e : actions.entries()) {
    for (auto& form : inflect(e.label)) table.add(std::move(form), e.label);
  }
  return table;
}

void merge_overrides(InflectionTable& table, std::istream& in) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("inflection overrides line " + std::to_string(n) +
                      ": expected surface<TAB>canonical");
    }
    auto surface = canonicalize(std::string_view(line).substr(0, tab));
    auto canonical = canonicalize(std::string_view(line).substr(tab + 1));
    if (surface.empty() || canonical.empty()) {
      throw DataError("inflection overrides line " + std::to_string(n) + ": empty field");
    }
    table.set(std::move(surface), std::move(canonical));
  }
}

void merge_overrides_file(InflectionTable& table, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open overrides file '" + path + "'");
  merge_overrides(table, in);
}

LabelSet extract_actions(std::string_view text, const InflectionTable& table) {
  LabelSet out(LabelKind::action);
  for (const auto& token : tokenize(text)) {
    if (const auto* verb = table.lookup(token)) out.insert(*verb);
  }
  return out;
}

IngredientMatcher::IngredientMatcher(const corpus::Vocabulary& ingredients) {
  for (const auto& e : ingredients.entries()) {
    auto n = tokenize(e.label).size();
    if (n == 0) continue;
    labels_.emplace(e.label, n);
    max_len_ = std::max(max_len_, n);
  }
}

std::vector<IngredientMatcher::Match> IngredientMatcher::match(
    const std::vector<std::string>& tokens) const {
  std::vector<Match> candidates;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string phrase;
    for (std::size_t len = 1; len <= max_len_ && i + len <= tokens.size(); ++len) {
      if (len > 1) phrase.push_back(' ');
      phrase += tokens[i + len - 1];
      if (labels_.count(phrase)) candidates.push_back({i, len, phrase});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Match& a, const Match& b) {
    if (a.length != b.length) return a.length > b.length;
    return a.start < b.start;
  });
  std::vector<bool> used(tokens.size(), false);
  std::vector<Match> chosen;
  for (auto& m : candidates) {
    bool free = std::none_of(used.begin() + m.start, used.begin() + m.start + m.length,
                             [](bool u) { return u; });
    if (!free) continue;
    std::fill(used.begin() + m.start, used.begin() + m.start + m.length, true);
    chosen.push_back(std::move(m));
  }
  std::sort(chosen.begin(), chosen.end(),
            [](const Match& a, const Match& b) { return a.start < b.start; });
  return chosen;
}

LabelSet IngredientMatcher::extract(std::string_view text) const {
  LabelSet out(LabelKind::ingredient);
  for (const auto& m : match(tokenize(text))) out.insert(m.label);
  return out;
}

LabelSet extract_ingredients(std::string_view text, const corpus::Vocabulary& ingredients) {
  return IngredientMatcher(ingredients).extract(text);
}

}  // namespace sgr::extract
