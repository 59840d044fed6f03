#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hcner {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad hyperparameters, flags or run-config files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed corpora, embedding files or tag sequences.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class TagError : public DataError {
 public:
  TagError(const std::string& what, std::size_t index)
      : DataError("tag " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// Non-finite losses or gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace hcner
