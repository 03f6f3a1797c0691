#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uparse {

// Bad command-line usage or config keys. CLI exit code 1.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data. CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// PTB bracket syntax error; carries the byte offset of the failure.
class PtbParseError : public DataError {
 public:
  PtbParseError(const std::string& msg, std::size_t offset)
      : DataError(msg + " at offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Tensor shape mismatch in the autodiff engine.
class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

// Non-finite loss or gradient during training. CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace uparse
