#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "histofilter/experiment.hpp"
#include "histofilter/filterbank.hpp"
#include "histofilter/pca.hpp"
#include "histofilter/svm.hpp"

namespace histofilter {

/// Model files are JSON documents
///   {"format": "histofilter-model", "version": 1, "kind": "...", ...}
/// whose matrices and vectors are base64 blocks of little-endian f64
/// ({"rows": r, "cols": c, "f64le": "..."}). Keys are sorted and doubles are
/// printed shortest-round-trip, so identical models give identical bytes.

std::string encode_model(const SvmModel& model);
std::string encode_model(const PcaModel& model);
std::string encode_model(const FilterModel& model);
std::string encode_model(const TumorModel& model);

SvmModel decode_svm_model(std::string_view json);
PcaModel decode_pca_model(std::string_view json);
FilterModel decode_filter_model(std::string_view json);
TumorModel decode_tumor_model(std::string_view json);

/// Atomic write; IoError on failure.
template <typename Model>
void write_model(const Model& model, const std::filesystem::path& path);

/// MissingModel when the file does not exist; BadModel on any schema error,
/// including a kind other than the one requested.
SvmModel read_svm_model(const std::filesystem::path& path);
PcaModel read_pca_model(const std::filesystem::path& path);
FilterModel read_filter_model(const std::filesystem::path& path);
TumorModel read_tumor_model(const std::filesystem::path& path);

}  // namespace histofilter
