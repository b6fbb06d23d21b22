#include "lmflow/error.hpp"

namespace lmflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidStateSpace: return "InvalidStateSpace";
    case ErrorCode::InvalidShareVector: return "InvalidShareVector";
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::StateSpaceMismatch: return "StateSpaceMismatch";
    case ErrorCode::PeriodMismatch: return "PeriodMismatch";
    case ErrorCode::EmptyChain: return "EmptyChain";
    case ErrorCode::BadQuarterFormat: return "BadQuarterFormat";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::BadStateLabel: return "BadStateLabel";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::BadField: return "BadField";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DuplicateObservation: return "DuplicateObservation";
    case ErrorCode::EmptyQuarter: return "EmptyQuarter";
    case ErrorCode::WindowNotCovered: return "WindowNotCovered";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::AllFitsFailed: return "AllFitsFailed";
    case ErrorCode::MissingQuarter: return "MissingQuarter";
    case ErrorCode::ShiftTooLarge: return "ShiftTooLarge";
    case ErrorCode::PlaceboOverlap: return "PlaceboOverlap";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::TooFewReplicates: return "TooFewReplicates";
    case ErrorCode::TooManyFailedReplicates: return "TooManyFailedReplicates";
    case ErrorCode::NotIrreducible: return "NotIrreducible";
    case ErrorCode::NotAperiodic: return "NotAperiodic";
    case ErrorCode::NonUniqueStationary: return "NonUniqueStationary";
    case ErrorCode::ClosedFormMismatch: return "ClosedFormMismatch";
    case ErrorCode::InvalidPerturbation: return "InvalidPerturbation";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::HorizonOutOfRange: return "HorizonOutOfRange";
  }
  return "Unknown";
}

namespace {
std::string with_row(const std::string& message, std::optional<long> row) {
  if (!row) return message;
  return "row " + std::to_string(*row) + ": " + message;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::optional<long> row)
    : std::runtime_error(with_row(message, row)), code_(code), row_(row) {}

}  // namespace lmflow
