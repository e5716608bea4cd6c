#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace railpf {

enum class ErrorCode {
  TooFewPoints,
  NonMonotoneParameter,
  OutOfRange,
  DegenerateGeometry,
  OutOfMapRange,
  WindowTooShort,
  PriorOutsideMap,
  AllWeightsZero,
  DegenerateSet,
  NoNearbyTrack,
  InvalidSpec,
  ProfileMismatch,
  AlignmentGap,
  EmptySeries,
  InvalidConfig,
  Parse,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every recoverable failure in the library. The code
/// is stable and meant to be machine-matched; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a query falls outside the mapped interval [first, last].
class OutOfMapRangeError : public Error {
 public:
  OutOfMapRangeError(double d, double first, double last);

  double distance() const noexcept { return d_; }
  double map_first() const noexcept { return first_; }
  double map_last() const noexcept { return last_; }

 private:
  double d_;
  double first_;
  double last_;
};

}  // namespace railpf
