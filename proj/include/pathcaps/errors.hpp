#pragma once

#include <stdexcept>
#include <string>

namespace pathcaps {

// Tensor extents or layer wiring do not line up.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

// An operation was called outside its contract (bad argument, wrong call order).
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

// A file on disk does not match its declared format.
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

// Invalid run configuration (CLI flags, config file, missing inputs).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

}  // namespace pathcaps
