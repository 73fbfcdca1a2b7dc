// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0
//
// Semantic confidence scoring and rectification. A judge scores the predicted
// labels and proposes a rectified list; labels strictly above the mean
// confidence survive in each list, the survivors of both lists are
// intersected, and a top-n pool over both lists backs up a short intersection.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgr/errors.hpp"
#include "sgr/label_set.hpp"

namespace sgr::scsr {

struct ScoredLabel {
  std::string label;
  double confidence = 0.0;

  bool operator==(const ScoredLabel&) const = default;
};

// An initial prediction, optionally already carrying a confidence.
struct InitialLabel {
  std::string label;
  std::optional<double> confidence;
};

struct ScsrResult {
  std::vector<ScoredLabel> s_init;
  std::vector<ScoredLabel> s_rect;
  double tau_before = 0.0;
  double tau_after = 0.0;
  LabelSet l_before, l_after, l_inter, l_final;
  bool fallback_used = false;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::vector<ScoredLabel> score(const std::string& context,
                                         const std::vector<std::string>& labels) = 0;
  virtual std::vector<ScoredLabel> rectify(const std::string& context,
                                           const std::vector<ScoredLabel>& scored) = 0;
};

struct RectifyOptions {
  std::size_t n = 3;
  std::size_t retries = 2;  // extra attempts per judge call
};

// Raised once the retries for a judge call are exhausted. `s_init` is set when
// scoring succeeded and rectification failed.
class RectifyError : public JudgeError {
 public:
  RectifyError(const std::string& what, std::string stage, std::optional<std::vector<ScoredLabel>> s_init)
      : JudgeError(what), stage_(std::move(stage)), s_init_(std::move(s_init)) {}
  const std::string& stage() const { return stage_; }
  const std::optional<std::vector<ScoredLabel>>& s_init() const { return s_init_; }

 private:
  std::string stage_;
  std::optional<std::vector<ScoredLabel>> s_init_;
};

// Thresholding, intersection and fallback on already-scored lists.
ScsrResult combine(std::vector<ScoredLabel> s_init, std::vector<ScoredLabel> s_rect, std::size_t n);

// Scores bare labels with the judge (pre-scored labels pass through), asks it
// for a rectified list, then applies combine(). Labels are canonicalized and
// the first occurrence of a repeated label wins.
ScsrResult rectify(const std::string& context, const std::vector<InitialLabel>& initial,
                   JudgeBackend& judge, const RectifyOptions& options);

// Top-n of the pooled lists: repeated labels take their maximum confidence,
// ties go to the smaller label.
std::vector<ScoredLabel> top_n(const std::vector<ScoredLabel>& a, const std::vector<ScoredLabel>& b,
                               std::size_t n);

// Throws JudgeError unless every confidence is finite and within [0,1].
void validate_scores(const std::vector<ScoredLabel>& scores, const char* stage);

// ---------------------------------------------------------------------------
// Backends

struct ScriptEntry {
  double confidence = 0.5;
  // Replacement list emitted when the label is rectified; an empty list drops
  // the label, no list keeps it at `confidence`.
  std::optional<std::vector<ScoredLabel>> rectified;
};

class ScriptedJudge : public JudgeBackend {
 public:
  explicit ScriptedJudge(std::map<std::string, ScriptEntry> script) : script_(std::move(script)) {}

  std::vector<ScoredLabel> score(const std::string& context, const std::vector<std::string>& labels) override;
  std::vector<ScoredLabel> rectify(const std::string& context, const std::vector<ScoredLabel>& scored) override;

 private:
  std::map<std::string, ScriptEntry> script_;
};

// {"salt": {"confidence": 0.9, "rectified": [{"label": "salt", "confidence": 0.95}]}, ...}
std::map<std::string, ScriptEntry> parse_script(const nlohmann::json& doc);
std::map<std::string, ScriptEntry> read_script_file(const std::string& path);

struct OracleParams {
  double tp_conf = 0.9;
  double fp_conf = 0.3;
  double recovery_rate = 0.0;
  double jitter = 0.05;  // half-width of the uniform jitter, at most 0.05
  std::uint64_t seed = 0;

  void validate() const;
};

// Knows the gold set of one sample. Jitter is a pure function of
// (seed, stage, context, label), so repeated calls agree.
class OracleJudge : public JudgeBackend {
 public:
  OracleJudge(LabelSet gold, OracleParams params);

  std::vector<ScoredLabel> score(const std::string& context, const std::vector<std::string>& labels) override;
  std::vector<ScoredLabel> rectify(const std::string& context, const std::vector<ScoredLabel>& scored) override;

 private:
  double confidence(std::uint64_t stage, const std::string& context, const std::string& label) const;

  LabelSet gold_;
  OracleParams params_;
};

struct PromptTemplate {
  std::string version;
  std::string system;
  std::string user;  // contains {{context}} and {{labels}}
};

// File layout: a `version: <id>` line, the system prompt, a line holding only
// `---`, then the user prompt.
PromptTemplate parse_prompt_template(const std::string& text);
PromptTemplate read_prompt_template(const std::string& path);
std::string render_prompt(const std::string& user_template, const std::string& context,
                          const std::string& labels_json);

struct RemoteJudgeConfig {
  std::string endpoint;  // http(s)://host[:port]/path
  std::string api_key;
  std::string model;
  PromptTemplate score_prompt;
  PromptTemplate rectify_prompt;
  std::chrono::milliseconds timeout{30000};
  unsigned max_in_flight = 4;

  // Fills endpoint, api_key and model from SGR_JUDGE_ENDPOINT,
  // SGR_JUDGE_API_KEY and SGR_JUDGE_MODEL where unset.
  void apply_environment();
};

// Parses the assistant content of a reply into scored labels. Confidences
// outside [0,1] are clamped and counted in `clamped`.
std::vector<ScoredLabel> parse_judge_reply(const std::string& body, std::size_t& clamped);

class RemoteJudge : public JudgeBackend {
 public:
  explicit RemoteJudge(RemoteJudgeConfig config);

  std::vector<ScoredLabel> score(const std::string& context, const std::vector<std::string>& labels) override;
  std::vector<ScoredLabel> rectify(const std::string& context, const std::vector<ScoredLabel>& scored) override;

  std::size_t clamped_count() const { return clamped_.load(); }
  std::string request_body(const PromptTemplate& prompt, const std::string& context,
                           const std::string& labels_json) const;

 private:
  std::vector<ScoredLabel> call(const PromptTemplate& prompt, const std::string& context,
                                const std::string& labels_json);

  RemoteJudgeConfig config_;
  std::string base_;
  std::string path_;
  std::counting_semaphore<64> in_flight_;
  std::atomic<std::size_t> clamped_{0};
};

nlohmann::ordered_json to_json(const ScoredLabel& s);
nlohmann::ordered_json to_json(const ScsrResult& r);

}  // namespace sgr::scsr
