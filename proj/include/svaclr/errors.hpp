#pragma once

#include <stdexcept>
#include <string>

namespace svaclr {

// Error taxonomy mirrored by the CLI exit-code map:
//   ConfigError -> 2, IoError -> 3, NumericError -> 4, CheckpointError -> 5.
// Shape/domain violations are programming or input errors inside the
// numeric library; uncaught they terminate with the generic failure code.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset files can be rejected for one of several distinct reasons; the
// code survives the message so tests and tools can branch on it.
struct DatasetFormatError : IoError {
  enum class Code { bad_magic, bad_version, truncated, dimension_mismatch };

  DatasetFormatError(Code c, const std::string& msg) : IoError(msg), code(c) {}

  Code code;
};

}  // namespace svaclr
