// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#include "sgr/text.hpp"

#include <cctype>

namespace sgr {
namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::string canonicalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    unsigned char u = static_cast<unsigned char>(c);
    out.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
  }
  // Strip surrounding punctuation, then any whitespace it exposed.
  std::size_t begin = 0;
  std::size_t end = out.size();
  while (begin < end && (is_punct(out[begin]) || is_space(out[begin]))) ++begin;
  while (end > begin && (is_punct(out[end - 1]) || is_space(out[end - 1]))) --end;
  return out.substr(begin, end - begin);
}

std::vector<RawToken> raw_tokens(std::string_view text) {
  std::vector<RawToken> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) {
      auto piece = text.substr(start, i - start);
      tokens.push_back({piece, canonicalize(piece)});
    }
  }
  return tokens;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : raw_tokens(text)) {
    if (!t.canonical.empty()) out.push_back(std::move(t.canonical));
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace sgr
