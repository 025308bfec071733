#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lfpw {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed formula text. position is a 0-based byte offset into the input.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Undeclared relation symbol or arity mismatch.
class SignatureError : public Error {
 public:
  using Error::Error;
};

// A relation variable bound by lfp occurs negatively.
class PolarityError : public Error {
 public:
  using Error::Error;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

// Structure files, family specs, certificates and configs.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Search ran out of wall-clock or node budget. Distinct from "no witness".
class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

}  // namespace lfpw
