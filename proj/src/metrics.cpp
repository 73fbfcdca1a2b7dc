// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#include "sgr/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "sgr/errors.hpp"
#include "sgr/parallel.hpp"
#include "sgr/text.hpp"

namespace sgr::metrics {

using nlohmann::json;
using nlohmann::ordered_json;

SetMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  SetMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  if (tp + fp + fn == 0) {
    m.f1 = m.iou = m.precision = m.recall = 1.0;
    return m;
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.iou = ratio(tp, tp + fp + fn);
  m.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  return m;
}

SetMetrics set_metrics(const LabelSet& pred, const LabelSet& gold) {
  std::size_t tp = 0;
  for (const auto& p : pred) tp += gold.contains(p) ? 1 : 0;
  return from_counts(tp, pred.size() - tp, gold.size() - tp);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (const auto& x : a) {
    std::size_t diag = 0;  // row[j-1] from the previous pass
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = x == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row.back();
}

double rouge_l(std::string_view candidate, std::string_view reference) {
  auto cand = tokenize(candidate);
  auto ref = tokenize(reference);
  if (cand.empty() || ref.empty()) return 0.0;
  auto lcs = static_cast<double>(lcs_length(cand, ref));
  if (lcs == 0.0) return 0.0;
  double p = lcs / static_cast<double>(cand.size());
  double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

// ---------------------------------------------------------------------------

std::vector<TextRecord> read_text_records(std::istream& in, const std::string& source) {
  std::vector<TextRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = source + ":" + std::to_string(lineno);
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string()) {
      throw DataError(where + ": record needs a string \"id\"");
    }
    TextRecord rec{doc["id"].get<std::string>(), {}};
    if (doc.contains("text") && doc["text"].is_string()) {
      rec.text = doc["text"].get<std::string>();
    } else if (doc.contains("instructions") && doc["instructions"].is_array()) {
      std::vector<std::string> steps;
      for (const auto& s : doc["instructions"]) {
        if (!s.is_string()) throw DataError(where + " (id " + rec.id + "): instructions must be strings");
        steps.push_back(s.get<std::string>());
      }
      rec.text = join(steps, " ");
    } else {
      throw DataError(where + " (id " + rec.id + "): record needs \"text\" or \"instructions\"");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TextRecord> read_text_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_text_records(in, path);
}

namespace {

std::map<std::string, const TextRecord*> index_by_id(const std::vector<TextRecord>& records, const char* side) {
  std::map<std::string, const TextRecord*> out;
  for (const auto& r : records) {
    if (!out.emplace(r.id, &r).second) throw DataError(std::string("duplicate ") + side + " id '" + r.id + "'");
  }
  return out;
}

std::string list_ids(const std::vector<std::string>& ids) {
  constexpr std::size_t kShown = 10;
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < kShown; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > kShown) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

void add_to(Aggregate& agg, const SetMetrics& m) {
  agg.f1 += m.f1;
  agg.iou += m.iou;
  agg.precision += m.precision;
  agg.recall += m.recall;
}

void divide(Aggregate& agg, double n) {
  agg.f1 /= n;
  agg.iou /= n;
  agg.precision /= n;
  agg.recall /= n;
}

ordered_json to_json(const Aggregate& a) {
  return {{"f1", a.f1}, {"iou", a.iou}, {"precision", a.precision}, {"recall", a.recall}};
}

}  // namespace

EvalReport evaluate_corpus(const std::vector<TextRecord>& preds, const std::vector<TextRecord>& refs,
                           const Extractors& ex, unsigned jobs) {
  auto pred_index = index_by_id(preds, "prediction");
  auto ref_index = index_by_id(refs, "reference");
  std::vector<std::string> pred_orphans, ref_orphans;
  for (const auto& [id, _] : pred_index) {
    if (!ref_index.count(id)) pred_orphans.push_back(id);
  }
  for (const auto& [id, _] : ref_index) {
    if (!pred_index.count(id)) ref_orphans.push_back(id);
  }
  if (!pred_orphans.empty() || !ref_orphans.empty()) {
    std::string msg = "unmatched ids";
    if (!pred_orphans.empty()) msg += "; predictions without reference: " + list_ids(pred_orphans);
    if (!ref_orphans.empty()) msg += "; references without prediction: " + list_ids(ref_orphans);
    throw DataError(msg);
  }

  EvalReport report;
  report.num_predictions = preds.size();
  report.num_references = refs.size();
  std::vector<std::pair<const TextRecord*, const TextRecord*>> pairs;
  for (const auto& [id, p] : pred_index) pairs.emplace_back(p, ref_index.at(id));
  report.samples.resize(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    const auto& [p, r] = pairs[i];
    auto& s = report.samples[i];
    s.id = p->id;
    s.action = set_metrics(extract::extract_actions(p->text, ex.actions), extract::extract_actions(r->text, ex.actions));
    s.ingredient = set_metrics(ex.ingredients.extract(p->text), ex.ingredients.extract(r->text));
    s.rouge_l = rouge_l(p->text, r->text);
  });

  std::size_t atp = 0, afp = 0, afn = 0, itp = 0, ifp = 0, ifn = 0;
  for (const auto& s : report.samples) {
    add_to(report.macro_action, s.action);
    add_to(report.macro_ingredient, s.ingredient);
    report.macro_rouge_l += s.rouge_l;
    atp += s.action.tp, afp += s.action.fp, afn += s.action.fn;
    itp += s.ingredient.tp, ifp += s.ingredient.fp, ifn += s.ingredient.fn;
  }
  if (!report.samples.empty()) {
    auto n = static_cast<double>(report.samples.size());
    divide(report.macro_action, n);
    divide(report.macro_ingredient, n);
    report.macro_rouge_l /= n;
  }
  report.micro_action = from_counts(atp, afp, afn);
  report.micro_ingredient = from_counts(itp, ifp, ifn);
  return report;
}

ordered_json to_json(const SetMetrics& m) {
  return {{"f1", m.f1},       {"iou", m.iou}, {"precision", m.precision}, {"recall", m.recall},
          {"tp", m.tp},       {"fp", m.fp},   {"fn", m.fn}};
}

ordered_json to_json(const EvalReport& report) {
  ordered_json j;
  j["num_predictions"] = report.num_predictions;
  j["num_references"] = report.num_references;
  j["config"] = report.config.is_null() ? ordered_json::object() : report.config;
  j["macro"] = {{"action", to_json(report.macro_action)},
                {"ingredient", to_json(report.macro_ingredient)},
                {"rouge_l", report.macro_rouge_l}};
  j["micro"] = {{"action", to_json(report.micro_action)}, {"ingredient", to_json(report.micro_ingredient)}};
  auto samples = ordered_json::array();
  for (const auto& s : report.samples) {
    samples.push_back({{"id", s.id},
                       {"action", to_json(s.action)},
                       {"ingredient", to_json(s.ingredient)},
                       {"rouge_l", s.rouge_l}});
  }
  j["samples"] = std::move(samples);
  return j;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ProbeMode mode) {
  return mode == ProbeMode::swap_actions ? "swap_actions" : "swap_ingredients";
}

std::optional<ProbeMode> parse_probe_mode(std::string_view text) {
  if (text == "swap_ingredients") return ProbeMode::swap_ingredients;
  if (text == "swap_actions") return ProbeMode::swap_actions;
  return std::nullopt;
}

SubstitutionTable read_substitutions(std::istream& in, const std::string& source) {
  SubstitutionTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    auto tab = line.find('\t');
    auto where = source + ":" + std::to_string(lineno);
    if (tab == std::string::npos) throw DataError(where + ": expected label<TAB>replacement");
    auto from = canonicalize(line.substr(0, tab));
    auto to = canonicalize(line.substr(tab + 1));
    if (from.empty() || to.empty()) throw DataError(where + ": empty label or replacement");
    if (!table.emplace(from, to).second) throw DataError(where + ": label '" + from + "' listed twice");
  }
  return table;
}

SubstitutionTable read_substitutions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_substitutions(in, path);
}

namespace {

// Keeps the punctuation glued to the first and last raw token of a mention,
// and a leading capital.
std::string rewrite_span(const std::vector<RawToken>& raw, std::size_t first, std::size_t last,
                         const std::string& replacement) {
  auto is_edge = [](unsigned char c) { return std::ispunct(c) != 0; };
  auto head = raw[first].raw;
  auto tail = raw[last].raw;
  std::size_t lead = 0;
  while (lead < head.size() && is_edge(static_cast<unsigned char>(head[lead]))) ++lead;
  std::size_t trail = 0;
  while (trail < tail.size() && is_edge(static_cast<unsigned char>(tail[tail.size() - 1 - trail]))) ++trail;
  std::string word = replacement;
  if (lead < head.size() && std::isupper(static_cast<unsigned char>(head[lead])) && !word.empty()) {
    word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
  }
  return std::string(head.substr(0, lead)) + word + std::string(tail.substr(tail.size() - trail));
}

}  // namespace

ProbeResult corruption_probe(std::string_view reference, ProbeMode mode, const SubstitutionTable& table,
                             const Extractors& ex) {
  if (table.empty()) throw DataError("corruption probe: empty substitution table");
  auto ref_actions = extract::extract_actions(reference, ex.actions);
  auto ref_ingredients = ex.ingredients.extract(reference);
  const auto& ref_labels = mode == ProbeMode::swap_actions ? ref_actions : ref_ingredients;
  for (const auto& label : ref_labels) {
    auto it = table.find(label);
    if (it != table.end() && ref_labels.contains(it->second)) {
      throw DataError("corruption probe: replacement '" + it->second + "' for '" + label +
                      "' already occurs in the reference");
    }
  }

  auto raw = raw_tokens(reference);
  // Positions of raw tokens that carry a canonical token.
  std::vector<std::size_t> canon_pos;
  std::vector<std::string> canon;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!raw[i].canonical.empty()) {
      canon_pos.push_back(i);
      canon.push_back(raw[i].canonical);
    }
  }

  // replaced[i] holds the new text for raw token i; covered marks tokens folded
  // into a preceding multi-token replacement.
  std::vector<std::optional<std::string>> replaced(raw.size());
  std::vector<bool> covered(raw.size(), false);
  ProbeResult result;
  if (mode == ProbeMode::swap_actions) {
    for (std::size_t k = 0; k < canon.size(); ++k) {
      const auto* verb = ex.actions.lookup(canon[k]);
      if (!verb) continue;
      auto it = table.find(*verb);
      if (it == table.end()) continue;
      replaced[canon_pos[k]] = rewrite_span(raw, canon_pos[k], canon_pos[k], it->second);
      ++result.substitutions;
    }
  } else {
    for (const auto& m : ex.ingredients.match(canon)) {
      auto it = table.find(m.label);
      if (it == table.end()) continue;
      auto first = canon_pos[m.start];
      auto last = canon_pos[m.start + m.length - 1];
      replaced[first] = rewrite_span(raw, first, last, it->second);
      for (auto i = first + 1; i <= last; ++i) covered[i] = true;
      ++result.substitutions;
    }
  }
  if (result.substitutions == 0) {
    throw DataError(std::string("corruption probe: no substitutable ") +
                    (mode == ProbeMode::swap_actions ? "action" : "ingredient") + " mentions in the reference");
  }

  std::vector<std::string> pieces;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (covered[i]) continue;
    pieces.push_back(replaced[i] ? *replaced[i] : std::string(raw[i].raw));
  }
  result.corrupted = join(pieces, " ");
  result.rouge_l = rouge_l(result.corrupted, reference);
  result.action = set_metrics(extract::extract_actions(result.corrupted, ex.actions), ref_actions);
  result.ingredient = set_metrics(ex.ingredients.extract(result.corrupted), ref_ingredients);
  // The reference scored against itself gives rouge 1 (or 0 when it has no
  // tokens) and f1 1 by construction.
  double self_rouge = rouge_l(reference, reference);
  result.delta_rouge_l = result.rouge_l - self_rouge;
  result.delta_action_f1 = result.action.f1 - 1.0;
  result.delta_ingredient_f1 = result.ingredient.f1 - 1.0;
  return result;
}

ordered_json to_json(const ProbeResult& r) {
  return {{"corrupted", r.corrupted},
          {"substitutions", r.substitutions},
          {"rouge_l", r.rouge_l},
          {"action", to_json(r.action)},
          {"ingredient", to_json(r.ingredient)},
          {"delta_rouge_l", r.delta_rouge_l},
          {"delta_action_f1", r.delta_action_f1},
          {"delta_ingredient_f1", r.delta_ingredient_f1}};
}

}  // namespace sgr::metrics
