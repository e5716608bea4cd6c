#include "railpf/error.hpp"

#include <sstream>

namespace railpf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NonMonotoneParameter: return "NonMonotoneParameter";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::OutOfMapRange: return "OutOfMapRange";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::PriorOutsideMap: return "PriorOutsideMap";
    case ErrorCode::AllWeightsZero: return "AllWeightsZero";
    case ErrorCode::DegenerateSet: return "DegenerateSet";
    case ErrorCode::NoNearbyTrack: return "NoNearbyTrack";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ProfileMismatch: return "ProfileMismatch";
    case ErrorCode::AlignmentGap: return "AlignmentGap";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Parse: return "ParseError";
    case ErrorCode::Io: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string out_of_map_message(double d, double first, double last) {
  std::ostringstream os;
  os.precision(17);
  os << "distance " << d << " outside map range [" << first << ", " << last << "]";
  return os.str();
}

}  // namespace

OutOfMapRangeError::OutOfMapRangeError(double d, double first, double last)
    : Error(ErrorCode::OutOfMapRange, out_of_map_message(d, first, last)),
      d_(d),
      first_(first),
      last_(last) {}

}  // namespace railpf
