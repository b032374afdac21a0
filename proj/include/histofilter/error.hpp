#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace histofilter {

enum class ErrorCode {
  // data_model
  MalformedRow,
  DuplicateSampleId,
  MissingColumn,
  TooFewPatients,
  WrongDatasetKind,
  ClassMissing,
  InconsistentPatient,
  // imaging
  PatchTooLarge,
  GridMismatch,
  UnsupportedFormat,
  CorruptFile,
  // pftas
  EmptyHistogram,
  // pca
  KTooLarge,
  ZeroVariance,
  // svm
  DimMismatch,
  SingleClass,
  NonFinite,
  Degenerate,
  // feature_io
  IoError,
  BadMagic,
  Truncated,
  JoinOrphans,
  // experiment
  EmptyPredictionSet,
  NoImages,
  NoPatients,
  PatientEliminated,
  FoldMismatch,
  MissingModel,
  BadModel,
  // cli / config
  InvalidArgument,
  UsageError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Domain error carrying a stable code. The message always starts with the
/// code name so diagnostics stay greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace histofilter
