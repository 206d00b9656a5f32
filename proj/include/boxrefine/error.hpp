#pragma once

#include <stdexcept>
#include <string>

namespace boxrefine {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing bundle manifest / file header.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Data parsed fine but violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Operation called on inputs that do not meet its precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Segmenter backend unreachable or not ready.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Segmenter backend answered with something that breaks the wire contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Configuration rejected before any stage ran.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Wraps an error raised inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace boxrefine
