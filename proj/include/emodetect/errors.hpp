#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emodetect {

// Base type for every error raised by the toolkit. User-facing commands map
// these to exit code 1 (input problems) or 2 (internal faults).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// --- label space errors -----------------------------------------------------

class UnknownLabelError : public Error {
 public:
  UnknownLabelError(const std::string& scheme, const std::string& label)
      : Error("unknown label '" + label + "' for scheme '" + scheme + "'") {}
};

class ResolverUnavailableError : public Error {
 public:
  ResolverUnavailableError()
      : Error("surprise requires a sentiment resolver but none was configured") {}
};

class EmptyCorpusError : public Error {
 public:
  explicit EmptyCorpusError(const std::string& what = "corpus is empty") : Error(what) {}
};

// --- corpus / format errors -------------------------------------------------

class FileNotFoundError : public Error {
 public:
  explicit FileNotFoundError(const std::string& path) : Error("file not found: " + path) {}
};

class FormatViolationError : public Error {
 public:
  FormatViolationError(std::size_t line, const std::string& reason)
      : Error("format violation at line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}
  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class SchemaMismatchError : public Error {
 public:
  explicit SchemaMismatchError(const std::string& what) : Error(what) {}
};

class TooSmallError : public Error {
 public:
  explicit TooSmallError(const std::string& what) : Error(what) {}
};

class UnbalancedInputError : public Error {
 public:
  explicit UnbalancedInputError(const std::string& what) : Error(what) {}
};

class MissingSourceError : public Error {
 public:
  explicit MissingSourceError(const std::string& name)
      : Error("ablation recipe requires missing source '" + name + "'") {}
};

class AllZeroError : public Error {
 public:
  AllZeroError() : Error("all emotion intensities are zero") {}
};

// --- backend errors ----------------------------------------------------------

class BackboneNotFoundError : public Error {
 public:
  explicit BackboneNotFoundError(const std::string& id)
      : Error("backbone not found: " + id) {}
};

class IncompatibleBackboneError : public Error {
 public:
  explicit IncompatibleBackboneError(const std::string& what) : Error(what) {}
};

class InvalidClassCountError : public Error {
 public:
  explicit InvalidClassCountError(int n)
      : Error("classifier needs at least 2 classes, got " + std::to_string(n)) {}
};

class ModelNotReadyError : public Error {
 public:
  ModelNotReadyError() : Error("classifier model has no encoder loaded") {}
};

class CorruptCheckpointError : public Error {
 public:
  explicit CorruptCheckpointError(const std::string& what) : Error(what) {}
};

// --- trainer errors ----------------------------------------------------------

class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(int epoch, long step)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
              std::to_string(step)),
        epoch_(epoch),
        step_(step) {}
  int epoch() const { return epoch_; }
  long step() const { return step_; }

 private:
  int epoch_;
  long step_;
};

// --- evalkit errors ----------------------------------------------------------

class LengthMismatchError : public Error {
 public:
  explicit LengthMismatchError(const std::string& what) : Error(what) {}
};

class MixedSchemaError : public Error {
 public:
  explicit MixedSchemaError(const std::string& what) : Error(what) {}
};

class EmptyCountsError : public Error {
 public:
  EmptyCountsError() : Error("confusion counts cover zero documents") {}
};

class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& what) : Error(what) {}
};

class RunCountMismatchError : public Error {
 public:
  RunCountMismatchError(std::size_t a, std::size_t b)
      : Error("run count mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

// --- llm client errors --------------------------------------------------------

class EmptyArticleError : public Error {
 public:
  EmptyArticleError() : Error("article text is empty") {}
};

class TransportFailureError : public Error {
 public:
  explicit TransportFailureError(const std::string& what) : Error(what) {}
};

class AuthFailureError : public Error {
 public:
  explicit AuthFailureError(const std::string& what) : Error(what) {}
};

// --- cli errors ----------------------------------------------------------------

class ConfigInvalidError : public Error {
 public:
  explicit ConfigInvalidError(const std::string& what) : Error(what) {}
};

class OutputUnwritableError : public Error {
 public:
  explicit OutputUnwritableError(const std::string& path)
      : Error("cannot write output: " + path) {}
};

}  // namespace emodetect
