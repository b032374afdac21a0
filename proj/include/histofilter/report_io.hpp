#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "histofilter/experiment.hpp"

namespace histofilter {

/// `magnification,seed,fold,patches,images_sum,images_vote,patients_sum,patients_vote,train_patches,test_patches,best_C,best_gamma,excluded_images`
/// Accuracies are fractions printed shortest-round-trip, so reading the file
/// back restores the exact values.
std::string per_fold_csv(const ExperimentReport& report);
ExperimentReport parse_per_fold_csv(std::string_view text);
ExperimentReport read_per_fold_csv(const std::filesystem::path& path);

/// One row per magnification, columns Patches, Images-Sum, Images-Vote,
/// Patients-Sum, Patients-Vote as "mean ± std" in percent.
std::string summary_csv(const ExperimentReport& report);

/// Everything in the report, full precision.
std::string summary_json(const ExperimentReport& report);

/// `fold,wins,losses,ties`
std::string win_loss_csv(std::span<const WinLoss> rows);

/// Writes per_fold.csv, summary.csv, summary.json and, when a filter was
/// used, retention.csv into `dir`.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace histofilter
