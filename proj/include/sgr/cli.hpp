// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace sgr::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kJudge = 3 };

// Written to <primary output>.manifest.json by every subcommand.
struct RunManifest {
  std::string subcommand;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string started_at;
  std::string finished_at;
  std::map<std::string, std::size_t> warnings;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
};

std::string manifest_path(const std::string& primary_output);

// Runs one command line (args[0] is the program name). Normal output goes to
// `out`, diagnostics and usage text to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv);

}  // namespace sgr::cli
