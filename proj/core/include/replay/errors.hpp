#pragma once

#include <stdexcept>

namespace replay {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: ConfigError -> 2, ExhaustionError -> 3,
// DataFormatError -> 4. Precondition violations on in-memory values throw
// std::invalid_argument and indicate a caller bug rather than bad input.

// Invalid or inconsistent run configuration (unknown key, out-of-range value,
// option set for an algorithm that does not use it).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A selection step ran out of eligible samples and fallback was disabled.
class ExhaustionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed buffer, trace, or precomputed-term file.
class DataFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace replay
