#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace biggp {

/// Error categories surfaced by the library. The category survives the trip
/// from a worker back to the master, so callers can dispatch on it.
enum class ErrorKind {
  NotTriangularNumber,
  OutOfTriangle,
  NoSuchObject,
  ClusterDown,
  UnknownFunction,
  BackendUnavailable,
  WorkerCrashed,
  NotPositiveDefinite,
  DimensionMismatch,
  SingularDiagonal,
  GeneratorError,
  StreamsUninitialized,
  UnsupportedSmoothness,
  NonFiniteObjective,
  InvalidArgument,
  Aborted,
  Internal,
};

const char* to_string(ErrorKind kind);
ErrorKind error_kind_from_string(const std::string& name);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::optional<int> rank = std::nullopt,
        std::optional<long> detail = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  /// Worker rank that raised the error, when it originated on a worker.
  std::optional<int> rank() const noexcept { return rank_; }
  /// Kind-specific integer payload, e.g. the failing global block index.
  std::optional<long> detail() const noexcept { return detail_; }
  /// Message without the kind/rank prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
  std::optional<int> rank_;
  std::optional<long> detail_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& what);

}  // namespace biggp
