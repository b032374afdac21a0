#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "histofilter/feature_io.hpp"

namespace histofilter {

/// exp(-gamma * ||x - y||^2). Throws DimMismatch on unequal lengths.
double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma);

struct PlattParams {
  double A = 0.0;
  double B = 0.0;
  friend bool operator==(const PlattParams&, const PlattParams&) = default;
};

/// Trained binary RBF C-SVM. Only vectors with alpha > 0 are kept;
/// dual_coeffs holds alpha_i * y_i.
struct SvmModel {
  RowMatrix support_vectors;
  Eigen::VectorXd dual_coeffs;
  double bias = 0.0;
  double gamma = 1.0;
  double C = 1.0;
  double c_positive = 1.0;  // effective box bounds per class (C times class weight)
  double c_negative = 1.0;
  std::optional<PlattParams> platt;
  std::string positive_label = "positive";
  std::string negative_label = "negative";

  Eigen::Index dim() const noexcept { return support_vectors.cols(); }
};

struct SvmTrainOptions {
  double tol = 1e-3;
  /// Iteration cap in units of max(n, 100) pair updates.
  int max_passes = 1000;
  std::size_t cache_bytes = std::size_t{128} << 20;
  /// Box bound multipliers: C_+ = C * weight_positive, C_- = C * weight_negative.
  double weight_positive = 1.0;
  double weight_negative = 1.0;
  std::string positive_label = "positive";
  std::string negative_label = "negative";
};

/// Class weights proportional to inverse class frequency, normalized so the
/// weights average to 1 over samples.
void set_balanced_weights(SvmTrainOptions& options, std::span<const int> y);

struct SvmTrainResult {
  SvmModel model;
  Eigen::VectorXd alpha;  // one per training sample
  double objective = 0.0; // dual objective sum(alpha) - 0.5 alpha'Q alpha
  double violation = 0.0; // final maximal KKT violation (m - M)
  long iterations = 0;
  bool converged = false;
};

/// SMO on the C-SVM dual with maximal-violating-pair working sets. Labels
/// must be +1/-1 with both present (SingleClass otherwise); non-finite
/// features raise NonFinite.
SvmTrainResult svm_train_detailed(const RowMatrix& x, std::span<const int> y, double C, double gamma,
                                  const SvmTrainOptions& options = {});

inline SvmModel svm_train(const RowMatrix& x, std::span<const int> y, double C, double gamma,
                          const SvmTrainOptions& options = {}) {
  return svm_train_detailed(x, y, C, gamma, options).model;
}

/// f(x) = sum_i coef_i K(sv_i, x) + b.
double svm_decision(const SvmModel& model, std::span<const double> x);
Eigen::VectorXd svm_decision(const SvmModel& model, const RowMatrix& x);

/// Ties (f == 0) go to the positive class.
inline bool is_positive(double decision) noexcept { return decision >= 0.0; }

/// P(positive | f) from the model's Platt sigmoid; throws BadModel when the
/// model carries no calibration.
double svm_probability(const SvmModel& model, double decision);

/// Same classifier with the label roles exchanged: decision values negate.
SvmModel swap_classes(const SvmModel& model);

// ---------------------------------------------------------------------------
// Platt scaling

/// Newton fit (with backtracking) of P(+|f) = 1 / (1 + exp(A f + B)) using
/// smoothed targets (N+ + 1)/(N+ + 2) and 1/(N- + 2).
/// Throws SingleClass or Degenerate (all decision values equal).
PlattParams platt_fit(std::span<const double> decision_values, std::span<const int> y);

double platt_probability(const PlattParams& p, double decision) noexcept;

// ---------------------------------------------------------------------------
// Model selection

struct GridCell {
  double C = 0.0;
  double gamma = 0.0;
  double mean_cv_accuracy = 0.0;
};

struct GridSearchResult {
  double best_C = 0.0;
  double best_gamma = 0.0;
  double cv_accuracy = 0.0;
  std::vector<GridCell> grid;  // C-major, in the given grid order
};

/// {2^-5, 2^-3, ..., 2^15}
std::vector<double> default_c_grid();
/// {2^-15, 2^-13, ..., 2^3}
std::vector<double> default_gamma_grid();

/// Fold id per sample: each class's indices are shuffled and dealt round-robin.
std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed);

struct GridSearchOptions {
  int folds = 5;
  std::vector<double> c_grid = default_c_grid();
  std::vector<double> gamma_grid = default_gamma_grid();
  std::uint64_t seed = 0;
  SvmTrainOptions train;
};

/// Exhaustive grid with stratified k-fold CV; cells run in parallel. Best is
/// the highest mean accuracy, ties to smaller C then smaller gamma.
GridSearchResult grid_search(const RowMatrix& x, std::span<const int> y, const GridSearchOptions& options);

/// Out-of-fold decision values for one (C, gamma) over the given fold ids.
/// A training split with a single class yields +/-1 constant decisions.
Eigen::VectorXd cross_val_decisions(const RowMatrix& x, std::span<const int> y, std::span<const int> fold_of,
                                    double C, double gamma, const SvmTrainOptions& options);

}  // namespace histofilter
