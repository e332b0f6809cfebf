#pragma once

#include <stdexcept>
#include <string>

namespace re2re {

/// Bad arguments, shape mismatches and invalid configuration.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Anything that went wrong while touching the filesystem or decoding a file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace re2re
