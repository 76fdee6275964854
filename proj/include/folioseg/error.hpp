#pragma once

#include <stdexcept>
#include <string>

namespace folioseg {

// Maps one-to-one onto the CLI exit codes.
enum class ErrorKind : int { usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

// Malformed files, invariant violations, shape mismatches.
struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

// Non-finite values during training or evaluation.
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

}  // namespace folioseg
