#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prefcf {

// Base of every error the library throws. The CLI maps these to exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error { using Error::Error; };
class ProtocolError : public Error { using Error::Error; };
class BoundsError : public Error { using Error::Error; };
class FoldInError : public Error { using Error::Error; };
class InfeasibleError : public Error { using Error::Error; };
class UndefinedMetricError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t where)
      : Error(what), where_(where) {}
  // Iteration or observation index the failure refers to.
  std::size_t where() const noexcept { return where_; }

 private:
  std::size_t where_;
};

}  // namespace prefcf
