#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "histofilter/data_model.hpp"
#include "histofilter/feature_io.hpp"
#include "histofilter/pca.hpp"
#include "histofilter/svm.hpp"

namespace histofilter {

enum class FeatureKind { pftas, deep_pca_100, deep_pca_200, deep_pca_400, deep_pca_600 };

std::string_view to_string(FeatureKind kind) noexcept;
std::optional<FeatureKind> parse_feature_kind(std::string_view text);
/// Target PCA width for the deep kinds, nullopt for pftas.
std::optional<int> pca_dim(FeatureKind kind) noexcept;

/// Relevance filter: "relevant" is the SVM's positive class.
struct FilterModel {
  ScenarioId scenario = ScenarioId::F7;
  FeatureKind feature_kind = FeatureKind::pftas;
  SvmModel svm;
  std::optional<PcaModel> pca;
  double validation_accuracy = 0.0;
  double cv_accuracy = 0.0;
};

struct FilterTrainOptions {
  ScenarioId scenario = ScenarioId::F7;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;
  GridSearchOptions grid;
};

struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Per label value, shuffles that label's indices and sends
/// round(fraction * count) of them to validation.
IndexSplit stratified_validation_split(std::span<const int> labels, double fraction, std::uint64_t seed);

/// Stratified train/validation split of the relabeled records; PCA (deep
/// kinds) is fitted on the training part. Every grid cell is cross-validated
/// on the training part, then refit on all of it and scored on validation.
/// The kept model has the best validation accuracy, ties broken by CV
/// accuracy, then smaller C, then smaller gamma.
FilterModel train_filter(const FeatureMatrix& source_features, const DatasetManifest& relabeled, FeatureKind kind,
                         const FilterTrainOptions& options = {});

struct FilterPartition {
  std::set<std::string> relevant;
  std::set<std::string> irrelevant;
};

/// Splits ids by the sign of the filter decision (PCA applied first when
/// present). Throws DimMismatch when the feature width is wrong.
FilterPartition apply_filter(const FilterModel& filter, const FeatureMatrix& patch_features);

/// Per-row decision values in input order.
Eigen::VectorXd filter_decisions(const FilterModel& filter, const FeatureMatrix& patch_features);

struct RetentionStats {
  Magnification magnification = Magnification::none;
  double pct_patches_relevant = 0.0;
  double pct_images_with_all_patches_relevant = 0.0;
  double pct_patients_with_all_images_relevant = 0.0;
};

/// One entry per magnification present, in 40x..400x order. An image counts
/// when all of its patches are relevant; a patient when all of their images
/// at that magnification count.
std::vector<RetentionStats> retention_stats(const DatasetManifest& manifest, const std::set<std::string>& relevant_ids);

/// `magnification,filter,pct_patches,pct_images,pct_patients`
std::string retention_csv(std::span<const RetentionStats> stats, std::string_view filter_name);
void write_retention_csv(std::span<const RetentionStats> stats, std::string_view filter_name,
                         const std::filesystem::path& path);

}  // namespace histofilter
