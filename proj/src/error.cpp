#include "biggp/error.hpp"

#include <array>
#include <utility>

namespace biggp {

namespace {

constexpr std::array<std::pair<ErrorKind, const char*>, 17> kNames{{
    {ErrorKind::NotTriangularNumber, "NotTriangularNumber"},
    {ErrorKind::OutOfTriangle, "OutOfTriangle"},
    {ErrorKind::NoSuchObject, "NoSuchObject"},
    {ErrorKind::ClusterDown, "ClusterDown"},
    {ErrorKind::UnknownFunction, "UnknownFunction"},
    {ErrorKind::BackendUnavailable, "BackendUnavailable"},
    {ErrorKind::WorkerCrashed, "WorkerCrashed"},
    {ErrorKind::NotPositiveDefinite, "NotPositiveDefinite"},
    {ErrorKind::DimensionMismatch, "DimensionMismatch"},
    {ErrorKind::SingularDiagonal, "SingularDiagonal"},
    {ErrorKind::GeneratorError, "GeneratorError"},
    {ErrorKind::StreamsUninitialized, "StreamsUninitialized"},
    {ErrorKind::UnsupportedSmoothness, "UnsupportedSmoothness"},
    {ErrorKind::NonFiniteObjective, "NonFiniteObjective"},
    {ErrorKind::InvalidArgument, "InvalidArgument"},
    {ErrorKind::Aborted, "Aborted"},
    {ErrorKind::Internal, "Internal"},
}};

std::string decorate(ErrorKind kind, const std::string& what, std::optional<int> rank) {
  std::string out = to_string(kind);
  if (rank) out += " (rank " + std::to_string(*rank) + ")";
  out += ": ";
  out += what;
  return out;
}

}  // namespace

const char* to_string(ErrorKind kind) {
  for (const auto& [k, name] : kNames)
    if (k == kind) return name;
  return "Internal";
}

ErrorKind error_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kNames)
    if (name == n) return k;
  return ErrorKind::Internal;
}

Error::Error(ErrorKind kind, const std::string& what, std::optional<int> rank,
             std::optional<long> detail)
    : std::runtime_error(decorate(kind, what, rank)), kind_(kind), message_(what), rank_(rank), detail_(detail) {}

void raise(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace biggp
