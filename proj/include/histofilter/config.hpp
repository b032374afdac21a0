#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "histofilter/experiment.hpp"

namespace histofilter {

/// TOML experiment description. Relative paths resolve against the config
/// file's directory.
///
///   [data]   manifest, features, feature_kind ("pftas" | "deep"),
///            filter, filter_features, pca_model, output
///   [folds]  n, train_fraction, seed, file
///   [svm]    c_grid, gamma_grid, cv_folds, tol, balanced, pca_dim
///   [run]    seeds, magnifications
struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path features;
  bool deep_features = false;
  std::optional<std::filesystem::path> filter;
  std::optional<std::filesystem::path> filter_features;
  std::optional<std::filesystem::path> pca_model;
  std::optional<std::filesystem::path> fold_file;
  std::filesystem::path output = "report";
  ExperimentParams params;
};

/// `default_seed` fills [run] seeds and [folds] seed when they are absent.
ExperimentConfig parse_experiment_config(std::string_view toml, const std::filesystem::path& base_dir,
                                         std::uint64_t default_seed = 0);
ExperimentConfig load_experiment_config(const std::filesystem::path& path, std::uint64_t default_seed = 0);

/// Tumor manifest at patch granularity: whole-image records are replaced by
/// their grid patches, with image sizes read from disk.
DatasetManifest load_patch_manifest(const std::filesystem::path& path, int patch_size = 150);

/// Reads manifests, features and models named by the config. Whole-image
/// manifests are expanded into grid patches (image sizes read from disk).
ExperimentData load_experiment_data(const ExperimentConfig& config, int patch_size = 150);

}  // namespace histofilter
