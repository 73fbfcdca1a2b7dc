// Copyright (c) 2026, sgr contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sgr {

// Malformed or inconsistent input data (bad records, orphan ids, empty corpora).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A required input stream or collection was empty.
class EmptyInputError : public DataError {
 public:
  using DataError::DataError;
};

// Judge backend failure: timeout, transport error, malformed or out-of-range reply.
class JudgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during optimization.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sgr
