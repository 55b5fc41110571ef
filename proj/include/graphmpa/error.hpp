#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace graphmpa {

/// Caller passed something the operation's precondition rejects.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure talking to an embedding or generation backend.
///
/// `status` is the HTTP status when one was received, 0 for transport
/// failures. `item` is the batch position for per-item batch failures and
/// `layer` is filled in by the hierarchy builder when the error crosses it.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, int status, bool retryable)
      : std::runtime_error(what), status_(status), retryable_(retryable) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

  std::optional<std::size_t> item;
  std::optional<std::size_t> layer;

 private:
  int status_;
  bool retryable_;
};

/// Index file problems. Each failure mode has its own type so callers and
/// tests can tell them apart.
class IndexFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionMismatchError : public IndexFormatError {
 public:
  using IndexFormatError::IndexFormatError;
};

class ChecksumError : public IndexFormatError {
 public:
  using IndexFormatError::IndexFormatError;
};

class TruncatedFileError : public IndexFormatError {
 public:
  using IndexFormatError::IndexFormatError;
};

/// Optimizer produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace graphmpa
