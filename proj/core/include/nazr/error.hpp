#pragma once

#include <stdexcept>
#include <string>

namespace nazr {

// Broad failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  kConfig,   // invalid parameters or configuration
  kData,     // malformed or missing input data
  kNumeric,  // numerical failure (non-finite values, degenerate fits)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::kNumeric, what) {}
};

// Binary container format failures. Each cause is distinguishable.
enum class FormatFault {
  kBadMagic,
  kBadVersion,
  kTruncated,
  kOverflow,
  kIo,
};

class FormatError : public DataError {
 public:
  FormatError(FormatFault fault, const std::string& what)
      : DataError(what), fault_(fault) {}
  FormatFault fault() const noexcept { return fault_; }

 private:
  FormatFault fault_;
};

}  // namespace nazr
