#pragma once

#include <stdexcept>
#include <string>

namespace mrgs {

// Failure families. The CLI maps each one onto its own exit code.
enum class ErrorKind {
  kParse = 2,
  kData = 3,
  kNumeric = 4,
  kProtocol = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Malformed input text, config documents, snapshots or checkpoints.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorKind::kParse, what) {}
};

// Structurally valid input that cannot be used (empty, too short, out of range).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

// Shape mismatches, non-finite values, tape misuse.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

// Evaluation protocol violations (excluded target, leakage).
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(ErrorKind::kProtocol, what) {}
};

}  // namespace mrgs
