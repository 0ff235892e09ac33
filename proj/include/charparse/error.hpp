#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace charparse {

// Malformed or inconsistent input data (treebank text, score files,
// checkpoints). The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bracketed-text syntax error with the byte offset and 1-based line where
// it was detected.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t offset, std::size_t line)
      : DataError(what + " at line " + std::to_string(line) + ", offset " +
                  std::to_string(offset)),
        offset_(offset),
        line_(line) {}

  std::size_t offset() const { return offset_; }
  std::size_t line() const { return line_; }

 private:
  std::size_t offset_;
  std::size_t line_;
};

// Violated precondition on an API call (bad offsets, dimension mismatch).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace charparse
