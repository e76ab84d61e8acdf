#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flexsft {

// Root of every library error. Precondition violations on value construction
// use std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An enumeration or search would exceed its configured budget.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::size_t requested, std::size_t budget)
      : Error(what + " (requested " + std::to_string(requested) + ", budget " +
              std::to_string(budget) + ")"),
        requested_(requested),
        budget_(budget) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t budget() const noexcept { return budget_; }

 private:
  std::size_t requested_;
  std::size_t budget_;
};

class ReducibleError : public Error {
 public:
  ReducibleError() : Error("reducible transition matrix") {}
  explicit ReducibleError(const std::string& what) : Error(what) {}
};

class UnreachableStateError : public Error {
 public:
  UnreachableStateError(std::size_t from, std::size_t to)
      : Error("unreachable state: no path from " + std::to_string(from) + " to " +
              std::to_string(to)) {}
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

class WordTooShortError : public Error {
 public:
  WordTooShortError(std::size_t length, std::size_t depth)
      : Error("word of length " + std::to_string(length) +
              " is shorter than cylinder depth " + std::to_string(depth)) {}
};

// The separated-set filter could not reach the requested entropy deviation;
// the caller should raise the word length.
class InsufficientNError : public Error {
 public:
  InsufficientNError(const std::string& what, double deviation)
      : Error(what), deviation_(deviation) {}

  double deviation() const noexcept { return deviation_; }

 private:
  double deviation_;
};

class NotUniquelyDecipherableError : public Error {
 public:
  using Error::Error;
};

class NonUniformLengthError : public Error {
 public:
  NonUniformLengthError() : Error("code words do not share a common length") {}
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class InfeasibleTargetError : public Error {
 public:
  using Error::Error;
};

class SearchFailureError : public Error {
 public:
  using Error::Error;
};

// A configuration file or command line could not be parsed. Carries the
// source location so diagnostics can point at the offending line.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, std::string field, const std::string& message)
      : Error(source + ":" + std::to_string(line) + ": " +
              (field.empty() ? std::string{} : "'" + field + "': ") + message),
        source_(std::move(source)),
        line_(line),
        field_(std::move(field)) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string source_;
  std::size_t line_;
  std::string field_;
};

}  // namespace flexsft
