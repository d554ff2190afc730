#include "curvedbody/types.hpp"

namespace cb {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SingularPoint: return "SingularPoint";
    case ErrorKind::BadParams: return "BadParams";
    case ErrorKind::NumericalDifferentiationFailure: return "NumericalDifferentiationFailure";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnsupportedChart: return "UnsupportedChart";
    case ErrorKind::SingularFrame: return "SingularFrame";
    case ErrorKind::SingularPhi: return "SingularPhi";
    case ErrorKind::SingularMetric: return "SingularMetric";
    case ErrorKind::UnsupportedForce: return "UnsupportedForce";
    case ErrorKind::IncompatibleMode: return "IncompatibleMode";
    case ErrorKind::StepIntoSingularity: return "StepIntoSingularity";
    case ErrorKind::NoClassicalRegion: return "NoClassicalRegion";
    case ErrorKind::UnboundedMotion: return "UnboundedMotion";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::OutOfRegime: return "OutOfRegime";
    case ErrorKind::BracketFailure: return "BracketFailure";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cb
