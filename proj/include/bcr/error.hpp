#pragma once

#include <stdexcept>

namespace bcr {

/// Thrown when an argument violates an operation's precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown for unreadable/unwritable files and malformed artifacts.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stored checksum did not match the payload it guards.
class IntegrityError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace bcr
