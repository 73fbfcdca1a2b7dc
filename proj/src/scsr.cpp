// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#include "sgr/scsr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <httplib.h>

#include "sgr/parallel.hpp"
#include "sgr/text.hpp"

namespace sgr::scsr {

namespace {

using nlohmann::json;

// Canonicalizes labels and merges repeats. keep_max selects the merge rule:
// maximum confidence, or else the first occurrence.
std::vector<ScoredLabel> normalize_scores(const std::vector<ScoredLabel>& in, bool keep_max) {
  std::vector<ScoredLabel> out;
  std::map<std::string, std::size_t> where;
  for (const auto& s : in) {
    auto label = canonicalize(s.label);
    if (label.empty()) continue;
    auto [it, fresh] = where.emplace(label, out.size());
    if (fresh) {
      out.push_back({label, s.confidence});
    } else if (keep_max) {
      out[it->second].confidence = std::max(out[it->second].confidence, s.confidence);
    }
  }
  return out;
}

double mean_confidence(const std::vector<ScoredLabel>& s) {
  if (s.empty()) return 0.0;
  double total = 0.0;
  for (const auto& x : s) total += x.confidence;
  return total / static_cast<double>(s.size());
}

LabelSet above(const std::vector<ScoredLabel>& s, double tau) {
  LabelSet out;
  for (const auto& x : s) {
    if (x.confidence > tau) out.insert(x.label);
  }
  return out;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform in [0,1) from a 64-bit hash.
double unit_from(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

template <typename Call>
auto with_retries(std::size_t retries, const char* stage, Call&& call) {
  std::string last;
  for (std::size_t attempt = 0; attempt <= retries; ++attempt) {
    try {
      return call();
    } catch (const JudgeError& e) {
      last = e.what();
    }
  }
  throw JudgeError(std::string(stage) + " failed after " + std::to_string(retries + 1) +
                   " attempt(s): " + last);
}

std::string excerpt(const std::string& text) {
  constexpr std::size_t kMax = 200;
  return text.size() <= kMax ? text : text.substr(0, kMax) + "...";
}

std::string labels_json(const std::vector<std::string>& labels) { return json(labels).dump(); }

std::string labels_json(const std::vector<ScoredLabel>& scored) {
  json arr = json::array();
  for (const auto& s : scored) arr.push_back({{"label", s.label}, {"confidence", s.confidence}});
  return arr.dump();
}

}  // namespace

void validate_scores(const std::vector<ScoredLabel>& scores, const char* stage) {
  for (const auto& s : scores) {
    if (!std::isfinite(s.confidence) || s.confidence < 0.0 || s.confidence > 1.0) {
      throw JudgeError(std::string(stage) + ": confidence " + std::to_string(s.confidence) + " for '" +
                       s.label + "' outside [0,1]");
    }
  }
}

std::vector<ScoredLabel> top_n(const std::vector<ScoredLabel>& a, const std::vector<ScoredLabel>& b,
                               std::size_t n) {
  std::map<std::string, double> pool;
  for (const auto* list : {&a, &b}) {
    for (const auto& s : *list) {
      auto [it, fresh] = pool.emplace(s.label, s.confidence);
      if (!fresh) it->second = std::max(it->second, s.confidence);
    }
  }
  std::vector<ScoredLabel> ranked;
  ranked.reserve(pool.size());
  for (const auto& [label, conf] : pool) ranked.push_back({label, conf});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ScoredLabel& x, const ScoredLabel& y) { return x.confidence > y.confidence; });
  if (ranked.size() > n) ranked.resize(n);
  return ranked;
}

ScsrResult combine(std::vector<ScoredLabel> s_init, std::vector<ScoredLabel> s_rect, std::size_t n) {
  if (n == 0) throw std::invalid_argument("scsr: n must be at least 1");
  ScsrResult r;
  r.s_init = std::move(s_init);
  r.s_rect = std::move(s_rect);
  r.tau_before = mean_confidence(r.s_init);
  r.tau_after = mean_confidence(r.s_rect);
  r.l_before = above(r.s_init, r.tau_before);
  r.l_after = above(r.s_rect, r.tau_after);
  r.l_inter = intersect(r.l_before, r.l_after);
  r.fallback_used = r.l_inter.size() < n;
  if (!r.fallback_used) {
    r.l_final = r.l_inter;
  } else {
    for (const auto& s : top_n(r.s_init, r.s_rect, n)) r.l_final.insert(s.label);
  }
  return r;
}

ScsrResult rectify(const std::string& context, const std::vector<InitialLabel>& initial,
                   JudgeBackend& judge, const RectifyOptions& options) {
  if (options.n == 0) throw std::invalid_argument("scsr: n must be at least 1");

  std::vector<std::string> order;
  std::map<std::string, std::optional<double>> given;
  for (const auto& l : initial) {
    auto label = canonicalize(l.label);
    if (label.empty() || given.count(label)) continue;
    order.push_back(label);
    given.emplace(label, l.confidence);
  }
  if (order.empty()) throw std::invalid_argument("scsr: no initial labels");

  std::vector<std::string> bare;
  for (const auto& label : order) {
    if (!given[label]) bare.push_back(label);
  }

  std::vector<ScoredLabel> s_init;
  try {
    std::map<std::string, double> judged;
    if (!bare.empty()) {
      auto scores = with_retries(options.retries, "scoring", [&] {
        auto s = normalize_scores(judge.score(context, bare), false);
        validate_scores(s, "scoring");
        for (const auto& label : bare) {
          if (std::none_of(s.begin(), s.end(), [&](const ScoredLabel& x) { return x.label == label; })) {
            throw JudgeError("scoring: reply omits label '" + label + "'");
          }
        }
        return s;
      });
      for (const auto& s : scores) judged[s.label] = s.confidence;
    }
    for (const auto& label : order) {
      s_init.push_back({label, given[label] ? *given[label] : judged.at(label)});
    }
    validate_scores(s_init, "initial");
  } catch (const JudgeError& e) {
    throw RectifyError(e.what(), "score", std::nullopt);
  }

  std::vector<ScoredLabel> s_rect;
  try {
    s_rect = with_retries(options.retries, "rectification", [&] {
      auto s = normalize_scores(judge.rectify(context, s_init), true);
      validate_scores(s, "rectification");
      if (s.empty()) throw JudgeError("rectification: empty list for a nonempty input");
      return s;
    });
  } catch (const JudgeError& e) {
    throw RectifyError(e.what(), "rectify", s_init);
  }
  return combine(std::move(s_init), std::move(s_rect), options.n);
}

// ---------------------------------------------------------------------------

std::vector<ScoredLabel> ScriptedJudge::score(const std::string&, const std::vector<std::string>& labels) {
  std::vector<ScoredLabel> out;
  for (const auto& label : labels) {
    auto it = script_.find(label);
    out.push_back({label, it == script_.end() ? 0.5 : it->second.confidence});
  }
  return out;
}

std::vector<ScoredLabel> ScriptedJudge::rectify(const std::string&, const std::vector<ScoredLabel>& scored) {
  std::vector<ScoredLabel> out;
  for (const auto& s : scored) {
    auto it = script_.find(s.label);
    if (it == script_.end()) {
      out.push_back(s);
    } else if (it->second.rectified) {
      out.insert(out.end(), it->second.rectified->begin(), it->second.rectified->end());
    } else {
      out.push_back({s.label, it->second.confidence});
    }
  }
  return out;
}

std::map<std::string, ScriptEntry> parse_script(const nlohmann::json& doc) {
  if (!doc.is_object()) throw DataError("judge script: expected an object keyed by label");
  std::map<std::string, ScriptEntry> script;
  for (const auto& [key, value] : doc.items()) {
    auto label = canonicalize(key);
    if (label.empty()) throw DataError("judge script: empty label");
    ScriptEntry entry;
    try {
      entry.confidence = value.at("confidence").get<double>();
      if (value.contains("rectified")) {
        std::vector<ScoredLabel> list;
        for (const auto& r : value.at("rectified")) {
          list.push_back({r.at("label").get<std::string>(), r.at("confidence").get<double>()});
        }
        validate_scores(list, "judge script");
        entry.rectified = std::move(list);
      }
    } catch (const json::exception& e) {
      throw DataError("judge script: label '" + key + "': " + e.what());
    } catch (const JudgeError& e) {
      throw DataError(e.what());
    }
    if (!(entry.confidence >= 0.0 && entry.confidence <= 1.0)) {
      throw DataError("judge script: label '" + key + "': confidence outside [0,1]");
    }
    script[label] = std::move(entry);
  }
  return script;
}

std::map<std::string, ScriptEntry> read_script_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open judge script " + path);
  try {
    return parse_script(json::parse(in));
  } catch (const json::parse_error& e) {
    throw DataError("judge script " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

void OracleParams::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(tp_conf) || !unit(fp_conf) || !unit(recovery_rate)) {
    throw std::invalid_argument("oracle judge: confidences and rates must lie in [0,1]");
  }
  if (!(tp_conf > fp_conf)) throw std::invalid_argument("oracle judge: tp_conf must exceed fp_conf");
  if (!(jitter >= 0.0 && jitter <= 0.05)) throw std::invalid_argument("oracle judge: jitter must lie in [0, 0.05]");
}

OracleJudge::OracleJudge(LabelSet gold, OracleParams params) : gold_(std::move(gold)), params_(params) {
  params_.validate();
}

double OracleJudge::confidence(std::uint64_t stage, const std::string& context, const std::string& label) const {
  double base = gold_.contains(label) ? params_.tp_conf : params_.fp_conf;
  if (params_.jitter == 0.0) return base;
  double u = unit_from(mix_seed(params_.seed ^ fnv1a(context), stage, fnv1a(label)));
  return std::clamp(base + params_.jitter * (2.0 * u - 1.0), 0.0, 1.0);
}

std::vector<ScoredLabel> OracleJudge::score(const std::string& context, const std::vector<std::string>& labels) {
  std::vector<ScoredLabel> out;
  for (const auto& label : labels) out.push_back({label, confidence(1, context, label)});
  return out;
}

std::vector<ScoredLabel> OracleJudge::rectify(const std::string& context, const std::vector<ScoredLabel>& scored) {
  std::vector<ScoredLabel> out;
  LabelSet seen;
  for (const auto& s : scored) {
    out.push_back({s.label, confidence(2, context, s.label)});
    seen.insert(s.label);
  }
  for (const auto& g : gold_) {
    if (seen.contains(g)) continue;
    double u = unit_from(mix_seed(params_.seed ^ fnv1a(context), 3, fnv1a(g)));
    if (u < params_.recovery_rate) out.push_back({g, confidence(2, context, g)});
  }
  return out;
}

// ---------------------------------------------------------------------------

PromptTemplate parse_prompt_template(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  PromptTemplate t;
  if (!std::getline(in, line) || line.rfind("version:", 0) != 0) {
    throw DataError("prompt template: first line must be 'version: <id>'");
  }
  t.version = line.substr(8);
  t.version.erase(0, t.version.find_first_not_of(" \t"));
  t.version.erase(t.version.find_last_not_of(" \t\r") + 1);
  std::string* target = &t.system;
  bool split = false;
  while (std::getline(in, line)) {
    if (!split && line == "---") {
      target = &t.user;
      split = true;
      continue;
    }
    *target += line;
    *target += '\n';
  }
  if (!split) throw DataError("prompt template: missing '---' separator");
  while (!t.system.empty() && t.system.back() == '\n') t.system.pop_back();
  while (!t.user.empty() && t.user.back() == '\n') t.user.pop_back();
  if (t.user.find("{{labels}}") == std::string::npos) {
    throw DataError("prompt template: user part lacks {{labels}}");
  }
  return t;
}

PromptTemplate read_prompt_template(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open prompt template " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_prompt_template(buf.str());
}

std::string render_prompt(const std::string& user_template, const std::string& context,
                          const std::string& labels) {
  std::string out;
  std::size_t pos = 0;
  while (pos < user_template.size()) {
    auto open = user_template.find("{{", pos);
    if (open == std::string::npos) {
      out += user_template.substr(pos);
      break;
    }
    out += user_template.substr(pos, open - pos);
    if (user_template.compare(open, 11, "{{context}}") == 0) {
      out += context;
      pos = open + 11;
    } else if (user_template.compare(open, 10, "{{labels}}") == 0) {
      out += labels;
      pos = open + 10;
    } else {
      out += "{{";
      pos = open + 2;
    }
  }
  return out;
}

void RemoteJudgeConfig::apply_environment() {
  auto fill = [](std::string& field, const char* name) {
    if (!field.empty()) return;
    if (const char* v = std::getenv(name)) field = v;
  };
  fill(endpoint, "SGR_JUDGE_ENDPOINT");
  fill(api_key, "SGR_JUDGE_API_KEY");
  fill(model, "SGR_JUDGE_MODEL");
}

std::vector<ScoredLabel> parse_judge_reply(const std::string& body, std::size_t& clamped) {
  std::string content;
  try {
    auto doc = json::parse(body);
    content = doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw JudgeError("judge reply is not a chat completion: " + excerpt(body));
  }
  auto open = content.find('[');
  auto close = content.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw JudgeError("judge reply holds no JSON array: " + excerpt(content));
  }
  std::vector<ScoredLabel> out;
  try {
    auto arr = json::parse(content.substr(open, close - open + 1));
    for (const auto& item : arr) {
      ScoredLabel s{item.at("label").get<std::string>(), item.at("confidence").get<double>()};
      if (!std::isfinite(s.confidence)) throw JudgeError("non-finite confidence");
      if (s.confidence < 0.0 || s.confidence > 1.0) {
        s.confidence = std::clamp(s.confidence, 0.0, 1.0);
        ++clamped;
      }
      out.push_back(std::move(s));
    }
  } catch (const json::exception&) {
    throw JudgeError("judge reply array is malformed: " + excerpt(content));
  } catch (const JudgeError& e) {
    throw JudgeError(std::string(e.what()) + " in judge reply: " + excerpt(content));
  }
  if (out.empty()) throw JudgeError("judge reply is an empty list");
  return out;
}

RemoteJudge::RemoteJudge(RemoteJudgeConfig config)
    : config_(std::move(config)), in_flight_(std::clamp<unsigned>(config_.max_in_flight, 1, 64)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url)) {
    throw std::invalid_argument("remote judge: endpoint must look like http(s)://host[:port]/path, got '" +
                                config_.endpoint + "'");
  }
  base_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/";
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (base_.rfind("https", 0) == 0) {
    throw std::invalid_argument("remote judge: built without TLS support, https endpoints are unavailable");
  }
#endif
  if (config_.model.empty()) throw std::invalid_argument("remote judge: model name is required");
}

std::string RemoteJudge::request_body(const PromptTemplate& prompt, const std::string& context,
                                      const std::string& labels) const {
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["temperature"] = 0;
  body["messages"] = nlohmann::ordered_json::array(
      {{{"role", "system"}, {"content", prompt.system}},
       {{"role", "user"}, {"content", render_prompt(prompt.user, context, labels)}}});
  return body.dump();
}

std::vector<ScoredLabel> RemoteJudge::call(const PromptTemplate& prompt, const std::string& context,
                                           const std::string& labels) {
  auto body = request_body(prompt, context, labels);
  in_flight_.acquire();
  httplib::Result res{nullptr, httplib::Error::Unknown};
  try {
    httplib::Client client(base_);
    auto secs = config_.timeout.count() / 1000;
    auto usecs = (config_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    res = client.Post(path_, headers, body, "application/json");
  } catch (...) {
    in_flight_.release();
    throw;
  }
  in_flight_.release();
  if (!res) throw JudgeError("judge request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw JudgeError("judge returned HTTP " + std::to_string(res->status) + ": " + excerpt(res->body));
  }
  std::size_t clamped = 0;
  auto out = parse_judge_reply(res->body, clamped);
  clamped_ += clamped;
  return out;
}

std::vector<ScoredLabel> RemoteJudge::score(const std::string& context, const std::vector<std::string>& labels) {
  return call(config_.score_prompt, context, labels_json(labels));
}

std::vector<ScoredLabel> RemoteJudge::rectify(const std::string& context, const std::vector<ScoredLabel>& scored) {
  return call(config_.rectify_prompt, context, labels_json(scored));
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json to_json(const ScoredLabel& s) {
  return {{"label", s.label}, {"confidence", s.confidence}};
}

nlohmann::ordered_json to_json(const ScsrResult& r) {
  auto list = [](const std::vector<ScoredLabel>& v) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : v) arr.push_back(to_json(s));
    return arr;
  };
  nlohmann::ordered_json j;
  j["s_init"] = list(r.s_init);
  j["s_rect"] = list(r.s_rect);
  j["tau_before"] = r.tau_before;
  j["tau_after"] = r.tau_after;
  j["l_before"] = r.l_before.sorted();
  j["l_after"] = r.l_after.sorted();
  j["l_inter"] = r.l_inter.sorted();
  j["l_final"] = r.l_final.sorted();
  j["fallback_used"] = r.fallback_used;
  return j;
}

}  // namespace sgr::scsr
