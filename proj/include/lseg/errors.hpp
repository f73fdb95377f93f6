#pragma once

#include <stdexcept>
#include <string>

namespace lseg {

// Bad configuration (invalid parameter combinations, shape contracts).
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Bad or missing data (I/O failures, malformed files, shape mismatches
// between data items). The CLI maps this to exit code 1.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lseg
