#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lmflow {

enum class ErrorCode {
  InvalidArgument,
  InvalidStateSpace,
  InvalidShareVector,
  InvalidMatrix,
  StateSpaceMismatch,
  PeriodMismatch,
  EmptyChain,
  BadQuarterFormat,
  MissingColumn,
  BadStateLabel,
  NonPositiveWeight,
  BadField,
  IoError,
  DuplicateObservation,
  EmptyQuarter,
  WindowNotCovered,
  SeriesTooShort,
  NonConvergence,
  AllFitsFailed,
  MissingQuarter,
  ShiftTooLarge,
  PlaceboOverlap,
  EmptySample,
  TooFewReplicates,
  TooManyFailedReplicates,
  NotIrreducible,
  NotAperiodic,
  NonUniqueStationary,
  ClosedFormMismatch,
  InvalidPerturbation,
  ConfigInvalid,
  HorizonOutOfRange,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library surfaces as this exception. `row` is set for
/// input-file errors and refers to the 1-based data row (header excluded).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<long> row = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<long> row() const noexcept { return row_; }

 private:
  ErrorCode code_;
  std::optional<long> row_;
};

}  // namespace lmflow
