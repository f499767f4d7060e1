#pragma once

#include <stdexcept>
#include <string>

namespace fishlen {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (bad JSON, missing keys, bad encodings).
class ParseError : public Error {
public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

/// Violated precondition or data invariant.
class ContractError : public Error {
public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

/// Numerical failure: degenerate configuration, non-convergence.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace fishlen
