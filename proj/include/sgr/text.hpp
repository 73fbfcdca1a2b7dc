// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0
//
// Label canonicalization and tokenization shared by every module.

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sgr {

// Lowercase (ASCII), trim, collapse internal whitespace runs to one space and
// strip punctuation surrounding the whole string. Bytes >= 0x80 pass through.
std::string canonicalize(std::string_view text);

// Whitespace split followed by canonicalize() on every piece; pieces that
// canonicalize to "" are dropped.
std::vector<std::string> tokenize(std::string_view text);

// Raw whitespace-delimited pieces of `text` together with their canonical form.
struct RawToken {
  std::string_view raw;
  std::string canonical;  // may be empty for pure punctuation
};
std::vector<RawToken> raw_tokens(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace sgr
