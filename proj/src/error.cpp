#include "ovpath/error.hpp"

namespace ovpath {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::SingularStainMatrix: return "SingularStainMatrix";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::TooFewRows: return "TooFewRows";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::RoiTooSmall: return "RoiTooSmall";
    case ErrorKind::IneligiblePatch: return "IneligiblePatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NoTumorCells: return "NoTumorCells";
    case ErrorKind::NoEligiblePatches: return "NoEligiblePatches";
    case ErrorKind::PlacementOverflow: return "PlacementOverflow";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::MissingInput: return "MissingInput";
    case ErrorKind::StageFailure: return "StageFailure";
  }
  return "Unknown";
}

}  // namespace ovpath
