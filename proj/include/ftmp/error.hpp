// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ftmp {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (JSON, JSONL, CSV). Carries a 1-based line number
// when one is meaningful, 0 otherwise.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by a numerical kernel, or a shape mismatch.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace ftmp
