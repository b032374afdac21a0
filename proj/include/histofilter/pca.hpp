#pragma once

#include <Eigen/Dense>

#include "histofilter/feature_io.hpp"

namespace histofilter {

struct PcaModel {
  Eigen::VectorXd mean;         // d
  RowMatrix components;         // k x d, orthonormal rows
  Eigen::VectorXd eigenvalues;  // k, non-increasing, population covariance
  double total_variance = 0.0;  // trace of the full covariance at fit time

  Eigen::Index input_dim() const noexcept { return components.cols(); }
  Eigen::Index output_dim() const noexcept { return components.rows(); }
};

/// Top-k principal axes of the population covariance. Uses the d x d
/// covariance when d <= n and the n x n Gram matrix otherwise. Each axis is
/// signed so its largest-magnitude coordinate is positive.
/// Throws KTooLarge unless 1 <= k <= min(n-1, d); InvalidArgument when n < 2.
PcaModel pca_fit(const RowMatrix& x, Eigen::Index k);
inline PcaModel pca_fit(const FeatureMatrix& x, Eigen::Index k) { return pca_fit(x.rows(), k); }

RowMatrix pca_transform(const PcaModel& model, const RowMatrix& x);
FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& x);

/// mean + y * components
RowMatrix pca_reconstruct(const PcaModel& model, const RowMatrix& y);

/// eigenvalue_i / total_variance. Throws ZeroVariance for constant data.
Eigen::VectorXd explained_variance_ratio(const PcaModel& model, double total_variance);
inline Eigen::VectorXd explained_variance_ratio(const PcaModel& model) {
  return explained_variance_ratio(model, model.total_variance);
}

}  // namespace histofilter
