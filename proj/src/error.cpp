#include "spectrum/error.hpp"

namespace spectrum {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kNonSymmetric: return "NonSymmetric";
    case ErrorKind::kSingularMatrix: return "SingularMatrix";
    case ErrorKind::kSignViolation: return "SignViolation";
    case ErrorKind::kDegenerateMarket: return "DegenerateMarket";
    case ErrorKind::kInconsistentCase: return "InconsistentCase";
    case ErrorKind::kSingularSystem: return "SingularSystem";
    case ErrorKind::kNoConvergence: return "NoConvergence";
    case ErrorKind::kBoundaryPoint: return "BoundaryPoint";
    case ErrorKind::kNonFinite: return "NonFinite";
    case ErrorKind::kPenaltyDomain: return "PenaltyDomain";
    case ErrorKind::kNoInteriorSolution: return "NoInteriorSolution";
    case ErrorKind::kTolerance: return "Tolerance";
    case ErrorKind::kInfeasibleMarket: return "InfeasibleMarket";
    case ErrorKind::kConditionViolation: return "ConditionViolation";
    case ErrorKind::kComplexRoots: return "ComplexRoots";
    case ErrorKind::kDiverged: return "Diverged";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kValidationError: return "ValidationError";
    case ErrorKind::kMissingGolden: return "MissingGolden";
    case ErrorKind::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace spectrum
