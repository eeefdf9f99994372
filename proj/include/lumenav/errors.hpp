#pragma once

#include <stdexcept>
#include <string>

namespace lumenav {

// Error category drives the CLI exit code: Data -> 2, Numeric -> 3.
enum class ErrorKind { Data, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define LUMENAV_ERROR(Name, Kind)                               \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& what)                      \
        : Error(ErrorKind::Kind, std::string(#Name) + ": " + what) {} \
  };

LUMENAV_ERROR(NonPositiveDepth, Numeric)
LUMENAV_ERROR(GimbalLock, Numeric)
LUMENAV_ERROR(ParseError, Data)
LUMENAV_ERROR(EmptyMesh, Data)
LUMENAV_ERROR(DimensionMismatch, Data)
LUMENAV_ERROR(EmptyValidSet, Numeric)
LUMENAV_ERROR(ZeroVariance, Numeric)
LUMENAV_ERROR(InsufficientOverlap, Numeric)
LUMENAV_ERROR(SolverDiverged, Numeric)
LUMENAV_ERROR(NonFiniteObjective, Numeric)
LUMENAV_ERROR(DegenerateObservation, Numeric)
LUMENAV_ERROR(OutOfOrderFrame, Data)
LUMENAV_ERROR(TrajectoryTooShort, Data)
LUMENAV_ERROR(InvalidParams, Data)
LUMENAV_ERROR(CenterlineTooShort, Data)
LUMENAV_ERROR(FrameMismatch, Data)
LUMENAV_ERROR(EmptyInput, Data)
LUMENAV_ERROR(IoError, Data)
LUMENAV_ERROR(DatasetError, Data)

#undef LUMENAV_ERROR

}  // namespace lumenav
