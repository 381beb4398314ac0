#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spectrum {

enum class ErrorKind {
  kDimensionMismatch,
  kInvalidArgument,
  kNonSymmetric,
  kSingularMatrix,
  kSignViolation,
  kDegenerateMarket,
  kInconsistentCase,
  kSingularSystem,
  kNoConvergence,
  kBoundaryPoint,
  kNonFinite,
  kPenaltyDomain,
  kNoInteriorSolution,
  kTolerance,
  kInfeasibleMarket,
  kConditionViolation,
  kComplexRoots,
  kDiverged,
  kParseError,
  kValidationError,
  kMissingGolden,
  kIo,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this type; `kind()` lets callers
// (the CLI, sweeps) decide whether a failure is fatal.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace spectrum
