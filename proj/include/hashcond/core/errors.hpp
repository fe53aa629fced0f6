#pragma once

#include <stdexcept>
#include <string>

namespace hashcond {

// Error taxonomy used across the library. The CLI maps ValidationError and
// ConfigError to exit code 1, everything else to 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Archive payload does not match its manifest.
struct CorruptionError : IoError {
  using IoError::IoError;
};

// Archive schema_version not supported by this build.
struct VersionError : IoError {
  using IoError::IoError;
};

// Requested construction cannot exist (e.g. more hash centers than codewords).
struct InfeasibleError : ValidationError {
  using ValidationError::ValidationError;
};

}  // namespace hashcond
