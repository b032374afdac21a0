#include "histofilter/error.hpp"

namespace histofilter {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::TooFewPatients: return "TooFewPatients";
    case ErrorCode::WrongDatasetKind: return "WrongDatasetKind";
    case ErrorCode::ClassMissing: return "ClassMissing";
    case ErrorCode::InconsistentPatient: return "InconsistentPatient";
    case ErrorCode::PatchTooLarge: return "PatchTooLarge";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::JoinOrphans: return "JoinOrphans";
    case ErrorCode::EmptyPredictionSet: return "EmptyPredictionSet";
    case ErrorCode::NoImages: return "NoImages";
    case ErrorCode::NoPatients: return "NoPatients";
    case ErrorCode::PatientEliminated: return "PatientEliminated";
    case ErrorCode::FoldMismatch: return "FoldMismatch";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::BadModel: return "BadModel";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace histofilter
