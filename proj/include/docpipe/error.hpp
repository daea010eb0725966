#pragma once

#include <exception>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace docpipe {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A corpus or run file could not be read or parsed.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Input violated a documented invariant. Carries one entry per finding.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, std::vector<std::string> findings = {})
      : Error(what), findings_(std::move(findings)) {}
  const std::vector<std::string>& findings() const noexcept { return findings_; }

 private:
  std::vector<std::string> findings_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Transport failure or timeout; safe to retry.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// Malformed request or response; never retried.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Request payload exceeds the backend's max_context; raised before dispatch.
class ContextOverflowError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// A pipeline stage failed for one document. `cause()` holds the underlying
/// error (for example a BackendError) when there is one.
class StageError : public Error {
 public:
  explicit StageError(const std::string& what, std::exception_ptr cause = nullptr)
      : Error(what), cause_(std::move(cause)) {}
  const std::exception_ptr& cause() const noexcept { return cause_; }

 private:
  std::exception_ptr cause_;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Run directory digests no longer match the corpus or config.
class StaleRunError : public Error {
 public:
  using Error::Error;
};

}  // namespace docpipe
