#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histofilter/data_model.hpp"
#include "histofilter/feature_io.hpp"
#include "histofilter/filterbank.hpp"
#include "histofilter/pca.hpp"
#include "histofilter/svm.hpp"

namespace histofilter {

struct PatchPrediction {
  std::string sample_id;
  double decision_value = 0.0;
  double prob_malign = 0.0;
  BinaryLabel predicted = BinaryLabel::benign;  // malign iff decision_value >= 0
};

enum class AggregationRule { majority_vote, sum_rule };
std::string_view to_string(AggregationRule rule) noexcept;

/// majority_vote: more malign votes than benign, ties malign.
/// sum_rule: malign iff mean prob_malign >= 0.5.
/// Throws EmptyPredictionSet.
BinaryLabel aggregate_image(std::span<const PatchPrediction> preds, AggregationRule rule);

struct ImageOutcome {
  std::string image_id;
  bool correct = false;
};

/// Fraction of a patient's images classified correctly. Throws NoImages.
double patient_score(std::span<const ImageOutcome> images);
/// Mean of patient scores. Throws NoPatients.
double overall_accuracy(std::span<const double> scores);

// ---------------------------------------------------------------------------
// Tumor classifier

/// Benign/malign SVM ("malign" is the positive class) with Platt calibration
/// and an optional PCA projection applied before it.
struct TumorModel {
  SvmModel svm;
  std::optional<PcaModel> pca;
  double cv_accuracy = 0.0;
};

struct TumorTrainOptions {
  GridSearchOptions grid;
  bool balanced = false;  // inverse-frequency C weights
  std::uint64_t seed = 0;
};

/// Grid search on (x, y), refit at the best cell, then Platt scaling on the
/// out-of-fold decision values of that cell. y: +1 malign, -1 benign.
TumorModel train_tumor_model(const RowMatrix& x, std::span<const int> y, const TumorTrainOptions& options);

std::vector<PatchPrediction> predict_patches(const TumorModel& model, const FeatureMatrix& features);

struct Evaluation {
  std::size_t patches = 0;
  double patch_acc = 0.0;
  double image_sum = 0.0;
  double image_vote = 0.0;
  double patient_sum = 0.0;
  double patient_vote = 0.0;
  std::vector<std::string> excluded_images;  // every patch filtered out
};

/// Scores predictions against the manifest's benign/malign labels. Images of
/// `manifest` with no prediction are excluded and listed; a patient left
/// with no image raises PatientEliminated.
Evaluation evaluate_predictions(const DatasetManifest& manifest, std::span<const PatchPrediction> preds);

// ---------------------------------------------------------------------------
// Protocol

struct ExperimentData {
  DatasetManifest manifest;  // tumor_target, one record per patch
  FeatureMatrix features;    // classifier features, joined by sample id
  std::optional<FilterModel> filter;
  std::optional<FeatureMatrix> filter_features;  // defaults to `features`
  std::optional<PcaModel> pca;                   // fixed projection for the classifier
};

struct ExperimentParams {
  int n_folds = 5;
  double train_fraction = 0.7;
  std::uint64_t fold_seed = 0;
  std::vector<FoldSpec> folds;       // used as given when nonempty
  std::vector<std::uint64_t> seeds = {0};
  std::optional<int> pca_dim;        // fitted per fold on training rows when no fixed PCA
  std::vector<Magnification> magnifications;  // empty: all present
  GridSearchOptions grid;
  bool balanced = false;
};

struct FoldResult {
  Magnification magnification = Magnification::none;
  std::uint64_t seed = 0;
  int fold_index = 0;
  double patch_acc = 0.0;
  double image_sum = 0.0;
  double image_vote = 0.0;
  double patient_sum = 0.0;
  double patient_vote = 0.0;
  std::size_t train_patches = 0;
  std::size_t test_patches = 0;
  double best_C = 0.0;
  double best_gamma = 0.0;
  std::vector<std::string> excluded_images;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single entry
};

struct SummaryRow {
  Magnification magnification = Magnification::none;
  std::size_t runs = 0;
  MetricSummary patch_acc, image_sum, image_vote, patient_sum, patient_vote;
};

struct ExperimentReport {
  std::vector<FoldResult> per_fold;  // ordered by (magnification, seed, fold)
  std::vector<SummaryRow> summary;   // per magnification, over seeds and folds
  std::optional<std::string> filter_name;
  std::vector<RetentionStats> retention;
};

/// Per (magnification, seed, fold): drop patches the filter calls irrelevant,
/// train the tumor SVM on training patients only, score the test patients.
/// Throws PatientEliminated when filtering leaves a test patient empty.
ExperimentReport run_experiment(const ExperimentData& data, const ExperimentParams& params);

std::vector<SummaryRow> summarize(std::span<const FoldResult> per_fold);

struct WinLoss {
  int fold_index = 0;
  int wins = 0;
  int losses = 0;
  int ties = 0;
};

/// A configuration is (magnification, seed, rule); per fold, counts where the
/// filtered patient accuracy beats, loses to or ties the unfiltered one.
/// Throws FoldMismatch unless both reports hold the same keys.
std::vector<WinLoss> win_loss(const ExperimentReport& filtered, const ExperimentReport& unfiltered);

}  // namespace histofilter
