// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#include "sgr/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sgr/corpus.hpp"
#include "sgr/errors.hpp"
#include "sgr/extract.hpp"
#include "sgr/grpo.hpp"
#include "sgr/metrics.hpp"
#include "sgr/parallel.hpp"
#include "sgr/rewards.hpp"
#include "sgr/scsr.hpp"

#ifndef SGR_PROMPTS_DIR
#define SGR_PROMPTS_DIR "prompts"
#endif

namespace sgr::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string now_iso() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

// Non-blank lines of a JSONL file parsed as objects carrying a string "id".
std::vector<json> read_json_lines(const std::string& path) {
  auto in = open_input(path);
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto where = path + ":" + std::to_string(lineno);
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_string()) {
      throw DataError(where + ": record needs a string \"id\"");
    }
    doc["__where"] = where;
    out.push_back(std::move(doc));
  }
  return out;
}

std::vector<std::string> string_array(const json& doc, const char* key, bool required) {
  std::vector<std::string> out;
  auto where = doc.value("__where", std::string("record"));
  if (!doc.contains(key)) {
    if (required) throw DataError(where + " (id " + doc["id"].get<std::string>() + "): missing \"" + key + "\"");
    return out;
  }
  if (!doc[key].is_array()) throw DataError(where + ": \"" + key + "\" must be an array");
  for (const auto& v : doc[key]) {
    if (!v.is_string()) throw DataError(where + ": \"" + key + "\" must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

extract::InflectionTable load_inflections(const corpus::Vocabulary& actions, const std::string& overrides) {
  auto table = extract::build_inflections(actions);
  if (!overrides.empty()) extract::merge_overrides_file(table, overrides);
  return table;
}

void write_manifest(RunManifest& m, const std::string& primary) {
  m.finished_at = now_iso();
  m.outputs.emplace("manifest", manifest_path(primary));
  auto out = open_output(manifest_path(primary));
  out << m.to_json().dump(2) << '\n';
}

// Options shared by every subcommand.
struct Common {
  std::string output;
  std::uint64_t seed = 17;
  unsigned jobs = 1;
};

void add_common(CLI::App* app, Common& c, const std::string& output_flag = "--output") {
  app->add_option(output_flag, c.output, "Primary output path; the run manifest is written beside it")->required();
  app->add_option("--seed", c.seed, "Seed for every random choice of the run")->capture_default_str();
  app->add_option("--jobs", c.jobs, "Worker threads; results do not depend on it")
      ->capture_default_str()
      ->check(CLI::Range(1u, 256u));
}

RunManifest start_manifest(const std::string& name, const Common& c) {
  RunManifest m;
  m.subcommand = name;
  m.seed = c.seed;
  m.jobs = c.jobs;
  m.started_at = now_iso();
  m.outputs.emplace("output", c.output);
  return m;
}

// ---------------------------------------------------------------------------
// Format examples shown in --help footers.

constexpr const char* kCorpusFormat =
    "Corpus record (JSONL, one per line):\n"
    R"(  {"id":"r1","title":"Pancakes","ingredients":["flour","milk"],"instructions":["Whisk the flour and milk."],"actions":["whisk"],"cot":"...","cot_confidence":0.91})";
constexpr const char* kVocabFormat =
    "Vocabulary file (JSON):\n"
    R"(  {"kind":"action","entries":[{"label":"whisk","count":12,"tier":"head"}]})";
constexpr const char* kTextFormat =
    "Text record (JSONL):\n"
    R"(  {"id":"r1","text":"Whisk the flour and milk."}   (a corpus record with "instructions" also works))";
constexpr const char* kLabelsFormat =
    "Label record (JSONL):\n"
    R"(  {"id":"r1","actions":["whisk"],"ingredients":["flour","milk"]})";
constexpr const char* kOverridesFormat =
    "Inflection overrides (TSV, '#' comments):\n"
    "  baked<TAB>bake";

std::string footer(std::initializer_list<const char*> parts) {
  std::string out;
  for (const auto* p : parts) {
    if (!out.empty()) out += "\n\n";
    out += p;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

int run_vocab_build(const Common& c, const std::string& input, const std::string& kind_text,
                    std::size_t head_top_k, std::optional<std::size_t> tail_max, std::ostream& out) {
  auto m = start_manifest("vocab build", c);
  m.inputs.emplace("input", input);
  auto kind = parse_label_kind(kind_text);
  if (!kind) throw std::invalid_argument("--kind must be action or ingredient");
  corpus::ReadOptions ro;
  (*kind == LabelKind::action ? ro.require_actions : ro.require_ingredients) = true;
  auto samples = corpus::read_corpus_file(input, ro);
  auto vocab = corpus::build_vocabulary(samples, *kind);
  corpus::TierPolicy policy = corpus::default_tier_policy(vocab, head_top_k);
  if (tail_max) policy.tail_max_count = *tail_max;
  vocab = corpus::assign_tiers(std::move(vocab), policy);
  auto f = open_output(c.output);
  corpus::write_vocabulary(f, vocab);
  m.config = {{"kind", kind_text}, {"head_top_k", policy.head_top_k}, {"tail_max_count", policy.tail_max_count}};
  m.summary = {{"samples", samples.size()}, {"labels", vocab.size()}};
  write_manifest(m, c.output);
  out << "wrote " << vocab.size() << " labels to " << c.output << '\n';
  return kOk;
}

int run_vocab_tier(const Common& c, const std::string& input, std::size_t head_top_k,
                   std::optional<std::size_t> tail_max, std::ostream& out) {
  auto m = start_manifest("vocab tier", c);
  m.inputs.emplace("input", input);
  auto vocab = corpus::read_vocabulary_file(input);
  auto policy = corpus::default_tier_policy(vocab, head_top_k);
  if (tail_max) policy.tail_max_count = *tail_max;
  vocab = corpus::assign_tiers(std::move(vocab), policy);
  auto f = open_output(c.output);
  corpus::write_vocabulary(f, vocab);
  m.config = {{"head_top_k", policy.head_top_k}, {"tail_max_count", policy.tail_max_count}};
  write_manifest(m, c.output);
  out << "retiered " << vocab.size() << " labels into " << c.output << '\n';
  return kOk;
}

void write_filter_output(RunManifest& m, const Common& c, const corpus::FilterResult& r, std::ostream& out) {
  auto f = open_output(c.output);
  corpus::write_corpus(f, r.kept);
  m.summary = {{"kept", r.kept.size()}, {"dropped", r.dropped}, {"skipped", r.skipped}};
  write_manifest(m, c.output);
  out << "kept " << r.kept.size() << ", dropped " << r.dropped << ", skipped " << r.skipped << '\n';
}

int run_filter_longtail(const Common& c, const std::string& input, const std::string& vocab_path,
                        std::size_t top_k, std::ostream& out) {
  auto m = start_manifest("filter longtail", c);
  m.inputs = {{"input", input}, {"vocab", vocab_path}};
  m.config = {{"top_k", top_k}};
  auto samples = corpus::read_corpus_file(input);
  auto vocab = corpus::read_vocabulary_file(vocab_path);
  write_filter_output(m, c, corpus::filter_longtail(samples, vocab, top_k), out);
  return kOk;
}

int run_filter_confidence(const Common& c, const std::string& input, double threshold, std::ostream& out) {
  auto m = start_manifest("filter confidence", c);
  m.inputs.emplace("input", input);
  m.config = {{"threshold", threshold}};
  auto samples = corpus::read_corpus_file(input);
  write_filter_output(m, c, corpus::filter_by_confidence(samples, threshold), out);
  return kOk;
}

int run_prompt_build(const Common& c, const std::string& input, std::ostream& out) {
  auto m = start_manifest("prompt build", c);
  m.inputs.emplace("input", input);
  auto records = read_json_lines(input);
  auto f = open_output(c.output);
  for (const auto& r : records) {
    auto actions = LabelSet::from(string_array(r, "actions", false), LabelKind::action);
    auto ingredients = LabelSet::from(string_array(r, "ingredients", false), LabelKind::ingredient);
    ordered_json line{{"id", r["id"]}, {"prompt", corpus::build_context_prompt(actions, ingredients)}};
    f << line.dump() << '\n';
  }
  m.summary = {{"records", records.size()}};
  write_manifest(m, c.output);
  out << "wrote " << records.size() << " prompts to " << c.output << '\n';
  return kOk;
}

int run_extract(const Common& c, const std::string& input, const std::string& action_vocab,
                const std::string& ingredient_vocab, const std::string& overrides, std::ostream& out) {
  auto m = start_manifest("extract", c);
  m.inputs = {{"input", input}, {"action_vocab", action_vocab}, {"ingredient_vocab", ingredient_vocab}};
  if (!overrides.empty()) m.inputs.emplace("inflections", overrides);
  auto records = metrics::read_text_records_file(input);
  auto actions = corpus::read_vocabulary_file(action_vocab);
  auto table = load_inflections(actions, overrides);
  extract::IngredientMatcher matcher(corpus::read_vocabulary_file(ingredient_vocab));
  std::vector<std::string> lines(records.size());
  parallel_for(records.size(), c.jobs, [&](std::size_t i) {
    ordered_json line{{"id", records[i].id},
                      {"actions", extract::extract_actions(records[i].text, table).sorted()},
                      {"ingredients", matcher.extract(records[i].text).sorted()}};
    lines[i] = line.dump();
  });
  auto f = open_output(c.output);
  for (const auto& l : lines) f << l << '\n';
  m.summary = {{"records", records.size()}};
  write_manifest(m, c.output);
  out << "extracted labels for " << records.size() << " records into " << c.output << '\n';
  return kOk;
}

struct RewardArgs {
  std::string pred, gold, vocab, tier_weights, overrides;
  rewards::RewardWeights weights;
};

int run_reward(const Common& c, const RewardArgs& a, std::ostream& out) {
  auto m = start_manifest("reward", c);
  m.inputs = {{"pred", a.pred}, {"gold", a.gold}, {"vocab", a.vocab}};
  if (!a.tier_weights.empty()) m.inputs.emplace("tier_weights", a.tier_weights);
  if (!a.overrides.empty()) m.inputs.emplace("inflections", a.overrides);
  if (!(a.weights.epsilon > 0.0)) throw std::invalid_argument("--epsilon must be positive");
  auto tw = a.tier_weights.empty() ? rewards::TierWeights{} : rewards::read_tier_weights_file(a.tier_weights);
  auto vocab = corpus::read_vocabulary_file(a.vocab);
  auto table = load_inflections(vocab, a.overrides);

  auto preds = metrics::read_text_records_file(a.pred);
  std::map<std::string, const metrics::TextRecord*> pred_index;
  for (const auto& p : preds) {
    if (!pred_index.emplace(p.id, &p).second) throw DataError("duplicate prediction id '" + p.id + "'");
  }
  std::map<std::string, LabelSet> gold;
  for (const auto& r : read_json_lines(a.gold)) {
    auto id = r["id"].get<std::string>();
    if (gold.count(id)) throw DataError("duplicate gold id '" + id + "'");
    gold.emplace(id, LabelSet::from(string_array(r, "actions", true), LabelKind::action));
  }
  std::vector<std::string> orphans;
  for (const auto& [id, _] : pred_index) {
    if (!gold.count(id)) orphans.push_back("pred:" + id);
  }
  for (const auto& [id, _] : gold) {
    if (!pred_index.count(id)) orphans.push_back("gold:" + id);
  }
  if (!orphans.empty()) {
    std::string msg = "unmatched ids:";
    for (const auto& o : orphans) msg += " " + o;
    throw DataError(msg);
  }

  std::vector<std::pair<std::string, const metrics::TextRecord*>> rows;
  for (const auto& [id, p] : pred_index) rows.emplace_back(id, p);
  std::vector<rewards::RewardBreakdown> results(rows.size());
  parallel_for(rows.size(), c.jobs, [&](std::size_t i) {
    try {
      results[i] = rewards::action_reward(rows[i].second->text, gold.at(rows[i].first), vocab, tw, a.weights, table);
    } catch (const std::invalid_argument& e) {
      throw DataError("id " + rows[i].first + ": " + e.what());
    }
  });

  auto f = open_output(c.output);
  double sums[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = results[i];
    ordered_json line{{"id", rows[i].first}, {"f1", r.f1},   {"word", r.word}, {"format", r.format},
                      {"total", r.total},    {"tp", r.tp},   {"fp", r.fp},     {"fn", r.fn}};
    f << line.dump() << '\n';
    sums[0] += r.f1, sums[1] += r.word, sums[2] += r.format, sums[3] += r.total;
  }
  double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  ordered_json means{{"samples", rows.size()}, {"f1", sums[0] / n}, {"word", sums[1] / n},
                     {"format", sums[2] / n},  {"total", sums[3] / n}};
  m.config = {{"alpha", a.weights.alpha},
              {"beta", a.weights.beta},
              {"gamma", a.weights.gamma},
              {"epsilon", a.weights.epsilon},
              {"tp", {{"head", tw.tp[0]}, {"mid", tw.tp[1]}, {"tail", tw.tp[2]}}},
              {"fn", {{"head", tw.fn[0]}, {"mid", tw.fn[1]}, {"tail", tw.fn[2]}}},
              {"fp_penalty", tw.fp_penalty}};
  m.summary = means;
  write_manifest(m, c.output);
  out << means.dump() << '\n';
  return kOk;
}

int run_grpo(const Common& c, bool seed_given, const std::string& config, const std::string& mode_text,
             std::ostream& out) {
  auto m = start_manifest("grpo-train", c);
  auto mode = grpo::parse_reward_mode(mode_text);
  if (!mode) throw std::invalid_argument("--reward-mode must be f1_only, word_only or combined");
  grpo::GrpoConfig cfg;
  grpo::SyntheticTaskConfig task_cfg;
  if (!config.empty()) {
    m.inputs.emplace("config", config);
    grpo::apply_config_file(config, cfg, task_cfg);
  }
  if (seed_given) {
    cfg.seed = c.seed;
    task_cfg.seed = c.seed;
  }
  m.seed = cfg.seed;
  cfg.jobs = c.jobs;
  cfg.validate();
  grpo::SyntheticTask task(task_cfg);

  auto f = open_output(c.output);
  auto result = grpo::train(cfg, task, *mode, std::nullopt,
                            [&](const grpo::TracePoint& p) { f << grpo::trace_line(p) << '\n'; });
  f.flush();

  m.config = {{"reward_mode", mode_text},
              {"group_size", cfg.group_size},
              {"clip_epsilon", cfg.clip_epsilon},
              {"kl_beta", cfg.kl_beta},
              {"optimizer", grpo::to_string(cfg.optimizer)},
              {"learning_rate", cfg.learning_rate},
              {"iterations", cfg.iterations},
              {"queries_per_iteration", cfg.queries_per_iteration},
              {"refresh_interval", cfg.refresh_interval},
              {"eval_interval", cfg.eval_interval},
              {"seed", cfg.seed},
              {"init_weight_scale", cfg.init_weight_scale},
              {"init_prob", cfg.init_prob},
              {"warm_start_epochs", cfg.warm_start_epochs},
              {"warm_start_lr", cfg.warm_start_lr},
              {"alpha", cfg.reward_weights.alpha},
              {"beta", cfg.reward_weights.beta},
              {"gamma", cfg.reward_weights.gamma},
              {"vocab_size", task_cfg.vocab_size},
              {"feature_dim", task_cfg.feature_dim},
              {"zipf_exponent", task_cfg.zipf_exponent},
              {"head_marginal", task_cfg.head_marginal},
              {"noise_rate", task_cfg.noise_rate},
              {"num_contexts", task_cfg.num_contexts},
              {"heldout_fraction", task_cfg.heldout_fraction},
              {"sft_fraction", task_cfg.sft_fraction},
              {"task_seed", task_cfg.seed}};
  const auto& e = result.final_eval;
  m.summary = {{"final_train_reward", result.trace.back().mean_reward},
               {"heldout_reward", e.mean_reward},
               {"precision", e.precision},
               {"recall", e.recall},
               {"fp_per_sample", e.fp_per_sample},
               {"tail_recall", e.tiers[2].recall}};
  write_manifest(m, c.output);
  out << m.summary.dump() << '\n';
  return kOk;
}

struct ScsrArgs {
  std::string input, judge = "oracle", script, prompts_dir = SGR_PROMPTS_DIR, endpoint, model;
  std::size_t n = 3;
  std::size_t retries = 2;
  double tp_conf = 0.9, fp_conf = 0.3, recovery_rate = 0.0, jitter = 0.05;
  long timeout_ms = 30000;
  unsigned max_in_flight = 4;
};

struct ScsrSample {
  std::string id;
  std::string context;
  std::vector<scsr::InitialLabel> labels;
  LabelSet gold;
};

ScsrSample parse_scsr_sample(const json& r) {
  ScsrSample s;
  s.id = r["id"].get<std::string>();
  auto where = r["__where"].get<std::string>() + " (id " + s.id + ")";
  s.context = r.value("context", std::string());
  if (!r.contains("labels") || !r["labels"].is_array()) throw DataError(where + ": needs a \"labels\" array");
  for (const auto& l : r["labels"]) {
    if (l.is_string()) {
      s.labels.push_back({l.get<std::string>(), std::nullopt});
    } else if (l.is_object() && l.contains("label") && l["label"].is_string()) {
      scsr::InitialLabel il{l["label"].get<std::string>(), std::nullopt};
      if (l.contains("confidence")) {
        if (!l["confidence"].is_number()) throw DataError(where + ": confidence must be a number");
        double v = l["confidence"].get<double>();
        if (!(v >= 0.0 && v <= 1.0)) throw DataError(where + ": confidence outside [0,1]");
        il.confidence = v;
      }
      s.labels.push_back(std::move(il));
    } else {
      throw DataError(where + ": labels must be strings or {\"label\",\"confidence\"} objects");
    }
  }
  if (s.labels.empty()) throw DataError(where + ": empty label list");
  s.gold = LabelSet::from(string_array(r, "gold", false));
  return s;
}

int run_scsr(const Common& c, const ScsrArgs& a, std::ostream& out) {
  auto m = start_manifest("scsr", c);
  m.inputs.emplace("input", a.input);
  if (a.n == 0) throw std::invalid_argument("--n must be at least 1");
  std::vector<ScsrSample> samples;
  for (const auto& r : read_json_lines(a.input)) samples.push_back(parse_scsr_sample(r));

  std::function<std::unique_ptr<scsr::JudgeBackend>(const ScsrSample&)> make_judge;
  std::shared_ptr<scsr::RemoteJudge> remote;
  m.config = {{"judge", a.judge}, {"n", a.n}, {"retries", a.retries}};
  if (a.judge == "scripted") {
    if (a.script.empty()) throw std::invalid_argument("--script is required with --judge scripted");
    m.inputs.emplace("script", a.script);
    auto script = scsr::read_script_file(a.script);
    make_judge = [script](const ScsrSample&) { return std::make_unique<scsr::ScriptedJudge>(script); };
  } else if (a.judge == "oracle") {
    scsr::OracleParams p{a.tp_conf, a.fp_conf, a.recovery_rate, a.jitter, c.seed};
    p.validate();
    m.config["tp_conf"] = a.tp_conf;
    m.config["fp_conf"] = a.fp_conf;
    m.config["recovery_rate"] = a.recovery_rate;
    m.config["jitter"] = a.jitter;
    make_judge = [p](const ScsrSample& s) { return std::make_unique<scsr::OracleJudge>(s.gold, p); };
  } else if (a.judge == "remote") {
    scsr::RemoteJudgeConfig rc;
    rc.endpoint = a.endpoint;
    rc.model = a.model;
    rc.apply_environment();
    if (rc.endpoint.empty()) throw std::invalid_argument("remote judge needs --endpoint or SGR_JUDGE_ENDPOINT");
    auto dir = std::filesystem::path(a.prompts_dir);
    rc.score_prompt = scsr::read_prompt_template((dir / "judge_score_v1.txt").string());
    rc.rectify_prompt = scsr::read_prompt_template((dir / "judge_rectify_v1.txt").string());
    rc.timeout = std::chrono::milliseconds(a.timeout_ms);
    rc.max_in_flight = a.max_in_flight;
    remote = std::make_shared<scsr::RemoteJudge>(rc);
    m.config["endpoint"] = rc.endpoint;
    m.config["model"] = rc.model;
    m.config["score_prompt"] = rc.score_prompt.version;
    m.config["rectify_prompt"] = rc.rectify_prompt.version;
    m.config["timeout_ms"] = a.timeout_ms;
    m.config["max_in_flight"] = a.max_in_flight;
    make_judge = [remote](const ScsrSample&) -> std::unique_ptr<scsr::JudgeBackend> {
      struct Shared : scsr::JudgeBackend {
        std::shared_ptr<scsr::RemoteJudge> inner;
        std::vector<scsr::ScoredLabel> score(const std::string& c, const std::vector<std::string>& l) override {
          return inner->score(c, l);
        }
        std::vector<scsr::ScoredLabel> rectify(const std::string& c,
                                               const std::vector<scsr::ScoredLabel>& s) override {
          return inner->rectify(c, s);
        }
      };
      auto j = std::make_unique<Shared>();
      j->inner = remote;
      return j;
    };
  } else {
    throw std::invalid_argument("--judge must be scripted, oracle or remote");
  }

  scsr::RectifyOptions opts{a.n, a.retries};
  std::vector<std::string> lines(samples.size());
  std::vector<char> failed(samples.size(), 0);
  parallel_for(samples.size(), c.jobs, [&](std::size_t i) {
    const auto& s = samples[i];
    auto judge = make_judge(s);
    ordered_json line{{"id", s.id}};
    try {
      auto r = scsr::rectify(s.context, s.labels, *judge, opts);
      line["status"] = "rectified";
      auto body = scsr::to_json(r);
      for (auto& [k, v] : body.items()) line[k] = v;
    } catch (const scsr::RectifyError& e) {
      failed[i] = 1;
      line["status"] = "unrectified";
      line["stage"] = e.stage();
      line["error"] = e.what();
      if (e.s_init()) {
        auto arr = ordered_json::array();
        for (const auto& x : *e.s_init()) arr.push_back(scsr::to_json(x));
        line["s_init"] = std::move(arr);
      }
    }
    lines[i] = line.dump();
  });
  auto f = open_output(c.output);
  for (const auto& l : lines) f << l << '\n';
  std::size_t failures = std::count(failed.begin(), failed.end(), 1);
  m.warnings["unrectified"] = failures;
  if (remote) m.warnings["clamped_confidences"] = remote->clamped_count();
  m.summary = {{"samples", samples.size()}, {"rectified", samples.size() - failures}};
  write_manifest(m, c.output);
  out << "rectified " << samples.size() - failures << " of " << samples.size() << " samples into " << c.output
      << '\n';
  if (failures > 0) {
    throw JudgeError(std::to_string(failures) + " sample(s) left unrectified; see " + c.output);
  }
  return kOk;
}

int run_score(const Common& c, const std::string& pred, const std::string& ref, const std::string& action_vocab,
              const std::string& ingredient_vocab, const std::string& overrides, std::ostream& out) {
  auto m = start_manifest("score", c);
  m.inputs = {{"pred", pred}, {"ref", ref}, {"action_vocab", action_vocab}, {"ingredient_vocab", ingredient_vocab}};
  if (!overrides.empty()) m.inputs.emplace("inflections", overrides);
  auto actions = corpus::read_vocabulary_file(action_vocab);
  auto table = load_inflections(actions, overrides);
  extract::IngredientMatcher matcher(corpus::read_vocabulary_file(ingredient_vocab));
  auto report = metrics::evaluate_corpus(metrics::read_text_records_file(pred),
                                         metrics::read_text_records_file(ref), {table, matcher}, c.jobs);
  report.config = {{"pred", pred},
                   {"ref", ref},
                   {"action_vocab", action_vocab},
                   {"ingredient_vocab", ingredient_vocab},
                   {"inflections", overrides}};
  auto f = open_output(c.output);
  f << metrics::to_json(report).dump(2) << '\n';
  m.summary = {{"samples", report.samples.size()},
               {"macro_action_f1", report.macro_action.f1},
               {"macro_ingredient_f1", report.macro_ingredient.f1},
               {"macro_rouge_l", report.macro_rouge_l}};
  write_manifest(m, c.output);
  out << m.summary.dump() << '\n';
  return kOk;
}

int run_probe(const Common& c, const std::string& ref, const std::string& mode_text, const std::string& subs,
              const std::string& action_vocab, const std::string& ingredient_vocab, const std::string& overrides,
              std::ostream& out) {
  auto m = start_manifest("probe", c);
  m.inputs = {{"ref", ref}, {"subs", subs}, {"action_vocab", action_vocab}, {"ingredient_vocab", ingredient_vocab}};
  auto mode = metrics::parse_probe_mode(mode_text);
  if (!mode) throw std::invalid_argument("--mode must be swap_ingredients or swap_actions");
  auto in = open_input(ref);
  std::ostringstream text;
  text << in.rdbuf();
  auto actions = corpus::read_vocabulary_file(action_vocab);
  auto table = load_inflections(actions, overrides);
  extract::IngredientMatcher matcher(corpus::read_vocabulary_file(ingredient_vocab));
  auto result = metrics::corruption_probe(text.str(), *mode, metrics::read_substitutions_file(subs), {table, matcher});
  auto f = open_output(c.output);
  auto j = metrics::to_json(result);
  j["mode"] = mode_text;
  f << j.dump(2) << '\n';
  m.config = {{"mode", mode_text}};
  m.summary = {{"rouge_l", result.rouge_l},
               {"action_recall", result.action.recall},
               {"ingredient_recall", result.ingredient.recall}};
  write_manifest(m, c.output);
  out << m.summary.dump() << '\n';
  return kOk;
}

const CLI::App* deepest(const CLI::App* app) {
  for (const auto* sub : app->get_subcommands()) return deepest(sub);
  return app;
}

}  // namespace

ordered_json RunManifest::to_json() const {
  ordered_json j;
  j["tool"] = "sgr";
  j["version"] = kVersion;
  j["subcommand"] = subcommand;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["config"] = config;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["warnings"] = warnings;
  j["summary"] = summary;
  return j;
}

std::string manifest_path(const std::string& primary_output) { return primary_output + ".manifest.json"; }

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic grounding toolkit for recipe label prediction: corpora, rewards, GRPO, SCSR and metrics"};
  app.name(args.empty() ? "sgr" : std::filesystem::path(args[0]).filename().string());
  app.set_version_flag("--version", std::string("sgr ") + kVersion);
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 usage error, 2 data error, 3 judge or backend failure.");

  std::function<int()> action;

  // vocab build / vocab tier
  auto* vocab = app.add_subcommand("vocab", "Build or retier a label vocabulary")->require_subcommand(1);
  Common vb_c;
  std::string vb_in, vb_kind = "action";
  std::size_t vb_head = 55;
  std::optional<std::size_t> vb_tail;
  auto* vb = vocab->add_subcommand("build", "Count document frequencies of one label kind and assign tiers");
  vb->add_option("--input", vb_in, "Corpus JSONL")->required();
  vb->add_option("--kind", vb_kind, "action or ingredient")->capture_default_str();
  vb->add_option("--head-top-k", vb_head, "Labels ranked at or above this are head")->capture_default_str();
  vb->add_option("--tail-max-count", vb_tail, "Non-head labels with at most this count are tail (default: median)");
  add_common(vb, vb_c);
  vb->footer(footer({kCorpusFormat, kVocabFormat}));
  vb->callback([&] { action = [&] { return run_vocab_build(vb_c, vb_in, vb_kind, vb_head, vb_tail, out); }; });

  Common vt_c;
  std::string vt_in;
  std::size_t vt_head = 55;
  std::optional<std::size_t> vt_tail;
  auto* vt = vocab->add_subcommand("tier", "Reassign tiers of an existing vocabulary");
  vt->add_option("--input", vt_in, "Vocabulary JSON")->required();
  vt->add_option("--head-top-k", vt_head, "Labels ranked at or above this are head")->capture_default_str();
  vt->add_option("--tail-max-count", vt_tail, "Non-head labels with at most this count are tail (default: median)");
  add_common(vt, vt_c);
  vt->footer(kVocabFormat);
  vt->callback([&] { action = [&] { return run_vocab_tier(vt_c, vt_in, vt_head, vt_tail, out); }; });

  // filter longtail / filter confidence
  auto* filter = app.add_subcommand("filter", "Corpus sample filters")->require_subcommand(1);
  Common fl_c;
  std::string fl_in, fl_vocab;
  std::size_t fl_k = 55;
  auto* fl = filter->add_subcommand("longtail", "Drop samples whose actions all rank within the top k");
  fl->add_option("--input", fl_in, "Corpus JSONL")->required();
  fl->add_option("--vocab", fl_vocab, "Action vocabulary JSON")->required();
  fl->add_option("--top-k", fl_k, "Rank cutoff")->capture_default_str();
  add_common(fl, fl_c);
  fl->footer(footer({kCorpusFormat, kVocabFormat}));
  fl->callback([&] { action = [&] { return run_filter_longtail(fl_c, fl_in, fl_vocab, fl_k, out); }; });

  Common fc_c;
  std::string fc_in;
  double fc_threshold = 0.85;
  auto* fc = filter->add_subcommand("confidence", "Keep samples whose cot_confidence exceeds the threshold");
  fc->add_option("--input", fc_in, "Corpus JSONL")->required();
  fc->add_option("--threshold", fc_threshold, "Strict lower bound on cot_confidence")->capture_default_str();
  add_common(fc, fc_c);
  fc->footer(kCorpusFormat);
  fc->callback([&] { action = [&] { return run_filter_confidence(fc_c, fc_in, fc_threshold, out); }; });

  // prompt build
  auto* prompt = app.add_subcommand("prompt", "Context prompts for instruction generation")->require_subcommand(1);
  Common pb_c;
  std::string pb_in;
  auto* pb = prompt->add_subcommand("build", "Render the action-ingredient context prompt per record");
  pb->add_option("--input", pb_in, "Label or corpus JSONL")->required();
  add_common(pb, pb_c);
  pb->footer(footer({kLabelsFormat, "Output record:\n"
                                    R"(  {"id":"r1","prompt":"Here are the cooking actions: [whisk]. The ingredients are [flour, milk]. Can you provide the preparation instructions for this image?"})"}));
  pb->callback([&] { action = [&] { return run_prompt_build(pb_c, pb_in, out); }; });

  // extract
  Common ex_c;
  std::string ex_in, ex_av, ex_iv, ex_over;
  auto* ex = app.add_subcommand("extract", "Extract canonical action and ingredient labels from text");
  ex->add_option("--input", ex_in, "Text JSONL")->required();
  ex->add_option("--action-vocab", ex_av, "Action vocabulary JSON")->required();
  ex->add_option("--ingredient-vocab", ex_iv, "Ingredient vocabulary JSON")->required();
  ex->add_option("--inflections", ex_over, "Inflection override TSV");
  add_common(ex, ex_c);
  ex->footer(footer({kTextFormat, kVocabFormat, kOverridesFormat, kLabelsFormat}));
  ex->callback([&] { action = [&] { return run_extract(ex_c, ex_in, ex_av, ex_iv, ex_over, out); }; });

  // reward
  Common rw_c;
  RewardArgs rw;
  auto* rwd = app.add_subcommand("reward", "Score model outputs with the composite action reward");
  rwd->add_option("--pred", rw.pred, "Model outputs, text JSONL")->required();
  rwd->add_option("--gold", rw.gold, "Gold actions, JSONL with an \"actions\" array")->required();
  rwd->add_option("--vocab", rw.vocab, "Action vocabulary JSON with tiers")->required();
  rwd->add_option("--alpha", rw.weights.alpha, "Weight of the F1 reward")->capture_default_str();
  rwd->add_option("--beta", rw.weights.beta, "Weight of the format reward")->capture_default_str();
  rwd->add_option("--gamma", rw.weights.gamma, "Weight of the word-level reward")->capture_default_str();
  rwd->add_option("--epsilon", rw.weights.epsilon, "F1 denominator guard")->capture_default_str();
  rwd->add_option("--tier-weights", rw.tier_weights, "Tier weight JSON");
  rwd->add_option("--inflections", rw.overrides, "Inflection override TSV");
  add_common(rwd, rw_c);
  rwd->footer(footer({"Prediction record (JSONL):\n"
                      R"(  {"id":"r1","text":"<think>batter needs mixing</think><answer>whisk, fold</answer>"})",
                      "Gold record (JSONL):\n"
                      R"(  {"id":"r1","actions":["whisk","bake"]})",
                      "Tier weights (JSON):\n"
                      R"(  {"tp":{"head":0.1,"mid":0.5,"tail":1.5},"fn":{"head":0.05,"mid":0.3,"tail":1.2},"fp_penalty":0.2})",
                      "Output record (JSONL):\n"
                      R"(  {"id":"r1","f1":0.5,"word":0.05,"format":1.0,"total":1.1,"tp":["whisk"],"fp":["fold"],"fn":["bake"]})"}));
  rwd->callback([&] { action = [&] { return run_reward(rw_c, rw, out); }; });

  // grpo-train
  Common gt_c;
  std::string gt_config, gt_mode = "combined";
  auto* gt = app.add_subcommand("grpo-train", "Train the toy multi-label policy with GRPO on the synthetic task");
  gt->add_option("--config", gt_config, "key = value config file");
  gt->add_option("--reward-mode", gt_mode, "f1_only, word_only or combined")->capture_default_str();
  add_common(gt, gt_c, "--trace");
  gt->footer(footer({"Config file ('#' comments):\n"
                     "  group_size = 8\n  kl_beta = 0.04\n  iterations = 500\n  vocab_size = 200",
                     "Trace record (JSONL):\n"
                     R"(  {"iteration":50,"mean_reward":1.52,"loss":-0.01,"kl":0.002,"heldout":{"mean_reward":1.8,"precision":0.97,"recall":0.94,"f1":0.95,"fp_per_sample":0.1,"mean_predicted":3.9,"head":{...},"mid":{...},"tail":{...}}})"}));
  gt->callback([&] {
    bool seed_given = gt->count("--seed") > 0;
    action = [&, seed_given] { return run_grpo(gt_c, seed_given, gt_config, gt_mode, out); };
  });

  // scsr
  Common sc_c;
  ScsrArgs sc;
  auto* scs = app.add_subcommand("scsr", "Judge-based confidence scoring and rectification of predicted labels");
  scs->add_option("--input", sc.input, "Label JSONL")->required();
  scs->add_option("--judge", sc.judge, "scripted, oracle or remote")->capture_default_str();
  scs->add_option("--n", sc.n, "Top-n fallback size")->capture_default_str();
  scs->add_option("--retries", sc.retries, "Extra attempts per judge call")->capture_default_str();
  scs->add_option("--script", sc.script, "Scripted judge JSON");
  scs->add_option("--tp-conf", sc.tp_conf, "Oracle confidence for gold labels")->capture_default_str();
  scs->add_option("--fp-conf", sc.fp_conf, "Oracle confidence for other labels")->capture_default_str();
  scs->add_option("--recovery-rate", sc.recovery_rate, "Oracle chance of restoring a missing gold label")
      ->capture_default_str();
  scs->add_option("--jitter", sc.jitter, "Oracle jitter half-width, at most 0.05")->capture_default_str();
  scs->add_option("--endpoint", sc.endpoint, "Remote chat-completion URL (or SGR_JUDGE_ENDPOINT)");
  scs->add_option("--model", sc.model, "Remote model name (or SGR_JUDGE_MODEL)");
  scs->add_option("--prompts-dir", sc.prompts_dir, "Directory holding the judge prompt templates")
      ->capture_default_str();
  scs->add_option("--timeout-ms", sc.timeout_ms, "Remote request timeout")->capture_default_str();
  scs->add_option("--max-in-flight", sc.max_in_flight, "Concurrent remote requests")->capture_default_str();
  add_common(scs, sc_c);
  scs->footer(footer({"Input record (JSONL; \"gold\" is read by the oracle judge only):\n"
                      R"(  {"id":"r1","context":"golden pancakes with syrup","labels":["salt",{"label":"flour","confidence":0.8}],"gold":["flour"]})",
                      "Judge script (JSON):\n"
                      R"(  {"salt":{"confidence":0.9,"rectified":[{"label":"salt","confidence":0.95}]},"sugar":{"confidence":0.4,"rectified":[]}})",
                      "Output record (JSONL):\n"
                      R"(  {"id":"r1","status":"rectified","s_init":[...],"s_rect":[...],"tau_before":0.7,"tau_after":0.75,"l_before":["flour","salt"],"l_after":["salt"],"l_inter":["salt"],"l_final":["butter","flour","salt"],"fallback_used":true})",
                      "Remote credentials come from SGR_JUDGE_API_KEY."}));
  scs->callback([&] { action = [&] { return run_scsr(sc_c, sc, out); }; });

  // score
  Common so_c;
  std::string so_pred, so_ref, so_av, so_iv, so_over;
  auto* so = app.add_subcommand("score", "Semantic set metrics and ROUGE-L of generated instructions");
  so->add_option("--pred", so_pred, "Generated text JSONL")->required();
  so->add_option("--ref", so_ref, "Reference text JSONL")->required();
  so->add_option("--action-vocab", so_av, "Action vocabulary JSON")->required();
  so->add_option("--ingredient-vocab", so_iv, "Ingredient vocabulary JSON")->required();
  so->add_option("--inflections", so_over, "Inflection override TSV");
  add_common(so, so_c);
  so->footer(footer({kTextFormat, kVocabFormat,
                     "Report (JSON):\n"
                     R"(  {"num_predictions":1,"num_references":1,"config":{...},"macro":{"action":{"f1":1,"iou":1,"precision":1,"recall":1},"ingredient":{...},"rouge_l":1},"micro":{...},"samples":[{"id":"r1","action":{...},"ingredient":{...},"rouge_l":1}]})"}));
  so->callback([&] { action = [&] { return run_score(so_c, so_pred, so_ref, so_av, so_iv, so_over, out); }; });

  // probe
  Common pr_c;
  std::string pr_ref, pr_mode = "swap_ingredients", pr_subs, pr_av, pr_iv, pr_over;
  auto* pr = app.add_subcommand("probe", "Corrupt a reference recipe and compare lexical with semantic scores");
  pr->add_option("--ref", pr_ref, "Reference recipe as plain text")->required();
  pr->add_option("--mode", pr_mode, "swap_ingredients or swap_actions")->capture_default_str();
  pr->add_option("--subs", pr_subs, "Substitution TSV")->required();
  pr->add_option("--action-vocab", pr_av, "Action vocabulary JSON")->required();
  pr->add_option("--ingredient-vocab", pr_iv, "Ingredient vocabulary JSON")->required();
  pr->add_option("--inflections", pr_over, "Inflection override TSV");
  add_common(pr, pr_c);
  pr->footer(footer({"Substitution table (TSV, '#' comments):\n  flour<TAB>rice flour", kVocabFormat,
                     "Output (JSON):\n"
                     R"(  {"corrupted":"...","substitutions":4,"rouge_l":0.9,"action":{...},"ingredient":{...},"delta_rouge_l":-0.1,"delta_action_f1":0,"delta_ingredient_f1":-1,"mode":"swap_ingredients"})"}));
  pr->callback([&] {
    action = [&] { return run_probe(pr_c, pr_ref, pr_mode, pr_subs, pr_av, pr_iv, pr_over, out); };
  });

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err) == 0 ? kOk : kUsage;
    err << app.get_name() << ": " << e.what() << "\n\n" << deepest(&app)->help();
    return kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const JudgeError& e) {
    err << "judge error: " << e.what() << '\n';
    return kJudge;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace sgr::cli
