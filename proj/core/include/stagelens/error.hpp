#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stagelens {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be parsed. Carries the file, the 1-based line and the
/// rule that was violated.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, std::string rule);

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string rule_;
};

/// A structurally valid input broke one or more data-model invariants.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations);

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace stagelens
