#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "histofilter/data_model.hpp"

namespace histofilter {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense features with one sample id per row. Ids are unique and every value
/// is finite; both are checked on construction.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::vector<std::string> sample_ids, RowMatrix rows);
  /// Empty matrix with a fixed width.
  static FeatureMatrix empty(Eigen::Index dim);

  const std::vector<std::string>& sample_ids() const noexcept { return ids_; }
  const RowMatrix& rows() const noexcept { return rows_; }
  Eigen::Index dim() const noexcept { return rows_.cols(); }
  std::size_t size() const noexcept { return ids_.size(); }

  std::optional<std::size_t> index_of(std::string_view sample_id) const;

  /// Sub-matrix with the given rows, in the given order.
  FeatureMatrix select(std::span<const std::size_t> indices) const;

 private:
  std::vector<std::string> ids_;
  RowMatrix rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// FV01, little-endian: "FV01", u32 n, u32 dim, then per row u16 id length,
/// UTF-8 id bytes, dim x f32. Written via temp file + rename.
void write_features(const FeatureMatrix& matrix, const std::filesystem::path& path);
std::string encode_features(const FeatureMatrix& matrix);

FeatureMatrix read_features(const std::filesystem::path& path);
FeatureMatrix decode_features(std::string_view bytes);

/// CSV mirror: header `sample_id,v0,...,v{dim-1}`.
FeatureMatrix read_features_csv(const std::filesystem::path& path);
void write_features_csv(const FeatureMatrix& matrix, const std::filesystem::path& path);

/// For each manifest record, the row index of its features. Throws
/// JoinOrphans listing every record without a feature row.
std::vector<std::size_t> join_rows(const DatasetManifest& manifest, const FeatureMatrix& features);

}  // namespace histofilter
