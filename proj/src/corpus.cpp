// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#include "sgr/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "sgr/errors.hpp"

namespace sgr::corpus {

using json = nlohmann::ordered_json;

namespace {

void dedupe_canonical(std::vector<std::string>& labels) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& l : labels) {
    auto c = canonicalize(l);
    if (c.empty() || !seen.insert(c).second) continue;
    out.push_back(std::move(c));
  }
  labels = std::move(out);
}

std::string where(std::size_t line, const std::string& id) {
  std::ostringstream os;
  os << "line " << line;
  if (!id.empty()) os << " (sample id '" << id << "')";
  return os.str();
}

std::vector<std::string> string_array(const json& obj, const char* key, std::size_t line,
                                      const std::string& id, bool required) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) throw DataError(where(line, id) + ": missing field '" + key + "'");
    return {};
  }
  if (!it->is_array()) throw DataError(where(line, id) + ": field '" + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) {
      throw DataError(where(line, id) + ": field '" + key + "' must contain only strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

RecipeSample parse_sample(const std::string& text, std::size_t line, const ReadOptions& options) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(where(line, "") + ": invalid JSON: " + e.what());
  }
  if (!obj.is_object()) throw DataError(where(line, "") + ": record must be a JSON object");

  RecipeSample s;
  auto id = obj.find("id");
  if (id == obj.end() || !id->is_string() || id->get<std::string>().empty()) {
    throw DataError(where(line, "") + ": field 'id' must be a nonempty string");
  }
  s.id = id->get<std::string>();
  if (auto t = obj.find("title"); t != obj.end() && !t->is_null()) {
    if (!t->is_string()) throw DataError(where(line, s.id) + ": field 'title' must be a string");
    s.title = t->get<std::string>();
  }
  s.ingredients = string_array(obj, "ingredients", line, s.id, options.require_ingredients);
  s.instructions = string_array(obj, "instructions", line, s.id, false);
  s.actions = string_array(obj, "actions", line, s.id, options.require_actions);
  if (auto c = obj.find("cot"); c != obj.end() && !c->is_null()) {
    if (!c->is_string()) throw DataError(where(line, s.id) + ": field 'cot' must be a string");
    s.cot = c->get<std::string>();
  }
  if (auto c = obj.find("cot_confidence"); c != obj.end() && !c->is_null()) {
    if (!c->is_number()) {
      throw DataError(where(line, s.id) + ": field 'cot_confidence' must be a number");
    }
    double v = c->get<double>();
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DataError(where(line, s.id) + ": cot_confidence outside [0,1]");
    }
    s.cot_confidence = v;
  }
  normalize_labels(s);
  return s;
}

}  // namespace

void normalize_labels(RecipeSample& sample) {
  dedupe_canonical(sample.actions);
  dedupe_canonical(sample.ingredients);
}

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::head: return "head";
    case Tier::mid: return "mid";
    case Tier::tail: return "tail";
  }
  return "mid";
}

std::optional<Tier> parse_tier(std::string_view text) {
  if (text == "head") return Tier::head;
  if (text == "mid") return Tier::mid;
  if (text == "tail") return Tier::tail;
  return std::nullopt;
}

Vocabulary::Vocabulary(LabelKind kind, std::vector<VocabEntry> entries)
    : kind_(kind), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const VocabEntry& a, const VocabEntry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.label < b.label;
  });
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].label, i).second) {
      throw DataError("vocabulary: duplicate label '" + entries_[i].label + "'");
    }
  }
}

const VocabEntry* Vocabulary::find(std::string_view canonical_label) const {
  auto it = index_.find(std::string(canonical_label));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

std::optional<std::size_t> Vocabulary::rank(std::string_view canonical_label) const {
  auto it = index_.find(std::string(canonical_label));
  if (it == index_.end()) return std::nullopt;
  return it->second + 1;
}

std::optional<Tier> Vocabulary::tier(std::string_view canonical_label) const {
  const auto* e = find(canonical_label);
  if (!e) return std::nullopt;
  return e->tier;
}

TierPolicy default_tier_policy(const Vocabulary& vocab, std::size_t head_top_k) {
  TierPolicy policy{head_top_k, 0};
  std::vector<std::uint64_t> counts;
  for (std::size_t i = head_top_k; i < vocab.size(); ++i) counts.push_back(vocab.entries()[i].count);
  if (counts.empty()) return policy;
  std::sort(counts.begin(), counts.end());
  std::size_t nearest_rank = (counts.size() + 1) / 2;  // ceil(0.5 * n)
  policy.tail_max_count = counts[nearest_rank - 1];
  return policy;
}

Vocabulary build_vocabulary(std::span<const RecipeSample> corpus, LabelKind kind) {
  if (corpus.empty()) throw EmptyInputError("build_vocabulary: empty corpus");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& sample : corpus) {
    std::set<std::string> seen;
    for (const auto& l : sample.labels(kind)) {
      auto c = canonicalize(l);
      if (!c.empty()) seen.insert(std::move(c));
    }
    for (const auto& l : seen) ++counts[l];
  }
  std::vector<VocabEntry> entries;
  entries.reserve(counts.size());
  for (auto& [label, count] : counts) entries.push_back({label, count, Tier::mid});
  Vocabulary vocab(kind, std::move(entries));
  auto policy = default_tier_policy(vocab);
  return assign_tiers(std::move(vocab), policy);
}

Vocabulary assign_tiers(Vocabulary vocab, const TierPolicy& policy) {
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& e = vocab.entries()[i];
    Tier t = Tier::mid;
    if (i + 1 <= policy.head_top_k) {
      t = Tier::head;
    } else if (e.count <= policy.tail_max_count) {
      t = Tier::tail;
    }
    vocab.set_tier(i, t);
  }
  return vocab;
}

FilterResult filter_longtail(std::span<const RecipeSample> corpus, const Vocabulary& vocab,
                             std::size_t top_k) {
  FilterResult result;
  for (const auto& sample : corpus) {
    if (sample.actions.empty()) {
      ++result.skipped;
      continue;
    }
    bool outside = std::any_of(sample.actions.begin(), sample.actions.end(), [&](const auto& a) {
      auto r = vocab.rank(canonicalize(a));
      return !r || *r > top_k;
    });
    if (outside) {
      result.kept.push_back(sample);
    } else {
      ++result.dropped;
    }
  }
  return result;
}

FilterResult filter_by_confidence(std::span<const RecipeSample> corpus, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("filter_by_confidence: threshold must lie in [0,1]");
  }
  FilterResult result;
  for (const auto& sample : corpus) {
    if (!sample.cot_confidence) {
      ++result.skipped;
    } else if (*sample.cot_confidence > threshold) {
      result.kept.push_back(sample);
    } else {
      ++result.dropped;
    }
  }
  return result;
}

std::string build_context_prompt(const LabelSet& actions, const LabelSet& ingredients) {
  // std::set iteration is already ascending.
  return "Here are the cooking actions: [" + join(actions.sorted(), ", ") +
         "]. The ingredients are [" + join(ingredients.sorted(), ", ") +
         "]. Can you provide the preparation instructions for this image?";
}

// ---- file formats -----------------------------------------------------------

std::vector<RecipeSample> read_corpus(std::istream& in, const ReadOptions& options) {
  std::vector<RecipeSample> out;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto sample = parse_sample(text, line, options);
    auto [it, fresh] = first_line.emplace(sample.id, line);
    if (!fresh) {
      throw DataError(where(line, sample.id) + ": duplicate id (first seen on line " +
                      std::to_string(it->second) + ")");
    }
    out.push_back(std::move(sample));
  }
  return out;
}

std::vector<RecipeSample> read_corpus_file(const std::string& path, const ReadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  try {
    return read_corpus(in, options);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string to_json_line(const RecipeSample& s) {
  json obj;
  obj["id"] = s.id;
  obj["title"] = s.title;
  obj["ingredients"] = s.ingredients;
  obj["instructions"] = s.instructions;
  obj["actions"] = s.actions;
  if (s.cot) obj["cot"] = *s.cot;
  if (s.cot_confidence) obj["cot_confidence"] = *s.cot_confidence;
  return obj.dump();
}

void write_corpus(std::ostream& out, std::span<const RecipeSample> corpus) {
  for (const auto& s : corpus) out << to_json_line(s) << '\n';
}

Vocabulary read_vocabulary(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("vocabulary: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string() ||
      !doc.contains("entries") || !doc["entries"].is_array()) {
    throw DataError("vocabulary: expected an object with 'kind' and 'entries'");
  }
  auto kind = parse_label_kind(doc["kind"].get<std::string>());
  if (!kind) throw DataError("vocabulary: unknown kind '" + doc["kind"].get<std::string>() + "'");
  std::vector<VocabEntry> entries;
  std::size_t index = 0;
  for (const auto& e : doc["entries"]) {
    auto fail = [&](const std::string& what) {
      throw DataError("vocabulary entry " + std::to_string(index) + ": " + what);
    };
    if (!e.is_object()) fail("must be an object");
    if (!e.contains("label") || !e["label"].is_string()) fail("missing string 'label'");
    if (!e.contains("count") || !e["count"].is_number_unsigned()) fail("missing nonnegative 'count'");
    VocabEntry entry;
    entry.label = canonicalize(e["label"].get<std::string>());
    if (entry.label.empty()) fail("empty label");
    entry.count = e["count"].get<std::uint64_t>();
    if (e.contains("tier")) {
      if (!e["tier"].is_string()) fail("'tier' must be a string");
      auto t = parse_tier(e["tier"].get<std::string>());
      if (!t) fail("unknown tier '" + e["tier"].get<std::string>() + "'");
      entry.tier = *t;
    }
    entries.push_back(std::move(entry));
    ++index;
  }
  return Vocabulary(*kind, std::move(entries));
}

Vocabulary read_vocabulary_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file '" + path + "'");
  try {
    return read_vocabulary(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  json doc;
  doc["kind"] = std::string(to_string(vocab.kind()));
  json entries = json::array();
  for (const auto& e : vocab.entries()) {
    json item;
    item["label"] = e.label;
    item["count"] = e.count;
    item["tier"] = std::string(to_string(e.tier));
    entries.push_back(std::move(item));
  }
  doc["entries"] = std::move(entries);
  out << doc.dump(2) << '\n';
}

}  // namespace sgr::corpus
