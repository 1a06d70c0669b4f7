// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 codiemb contributors
#pragma once

#include <stdexcept>
#include <string>

namespace codiemb {

// Input data failed a format or schema rule (bad JSONL line, bad record).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// A structurally valid input violated a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerically degenerate input (zero norm, zero variance, empty batch).
class DegenerateInputError : public std::runtime_error {
 public:
  explicit DegenerateInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller broke an inter-module contract (shape mismatch, missing layer, ...).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// On-disk container is corrupt or truncated.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid run configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace codiemb
