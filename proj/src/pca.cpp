#include "histofilter/pca.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "histofilter/error.hpp"

namespace histofilter {

namespace {

void fix_sign(Eigen::Ref<Eigen::RowVectorXd> v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (std::abs(v(j)) > best) {
      best = std::abs(v(j));
      arg = j;
    }
  }
  if (v(arg) < 0) v = -v;
}

// Fills rows [from, k) with unit vectors orthogonal to all earlier rows.
void complete_basis(RowMatrix& c, Eigen::Index from) {
  const Eigen::Index d = c.cols();
  for (Eigen::Index r = from; r < c.rows(); ++r) {
    Eigen::RowVectorXd best;
    double best_norm = -1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::RowVectorXd e = Eigen::RowVectorXd::Unit(d, j);
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index q = 0; q < r; ++q) e -= e.dot(c.row(q)) * c.row(q);
      double nrm = e.norm();
      if (nrm > best_norm + 1e-12) {
        best_norm = nrm;
        best = e;
      }
    }
    c.row(r) = best / best_norm;
  }
}

}  // namespace

PcaModel pca_fit(const RowMatrix& x, Eigen::Index k) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "PCA needs at least two samples");
  if (k < 1 || k > std::min(n - 1, d))
    throw Error(ErrorCode::KTooLarge, fmt::format("k={} with n={}, d={}", k, n, d));
  if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "PCA input");

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  RowMatrix centered = x.rowwise() - model.mean.transpose();
  const double inv_n = 1.0 / static_cast<double>(n);
  model.total_variance = centered.squaredNorm() * inv_n;
  model.components.resize(k, d);
  model.eigenvalues.resize(k);

  if (d <= n) {
    Eigen::MatrixXd cov = (centered.transpose() * centered) * inv_n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    // eigenvalues ascending
    for (Eigen::Index i = 0; i < k; ++i) {
      const Eigen::Index src = d - 1 - i;
      model.eigenvalues(i) = std::max(0.0, es.eigenvalues()(src));
      model.components.row(i) = es.eigenvectors().col(src).transpose();
    }
  } else {
    Eigen::MatrixXd gram = (centered * centered.transpose()) * inv_n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const double top = std::max(es.eigenvalues()(n - 1), 0.0);
    const double floor = std::max(top, 1e-300) * 1e-12;
    Eigen::Index filled = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const Eigen::Index src = n - 1 - i;
      const double lambda = es.eigenvalues()(src);
      model.eigenvalues(i) = std::max(0.0, lambda);
      if (lambda <= floor) continue;
      Eigen::RowVectorXd v = (centered.transpose() * es.eigenvectors().col(src)).transpose();
      // re-orthogonalize against earlier axes to stay well inside 1e-8
      for (Eigen::Index q = 0; q < filled; ++q) v -= v.dot(model.components.row(q)) * model.components.row(q);
      model.components.row(filled++) = v / v.norm();
    }
    if (filled < k) {
      for (Eigen::Index i = filled; i < k; ++i) model.eigenvalues(i) = 0.0;
      complete_basis(model.components, filled);
    }
  }
  for (Eigen::Index i = 0; i < k; ++i) fix_sign(model.components.row(i));
  return model;
}

RowMatrix pca_transform(const PcaModel& model, const RowMatrix& x) {
  if (x.cols() != model.input_dim())
    throw Error(ErrorCode::DimMismatch, fmt::format("expected {} columns, got {}", model.input_dim(), x.cols()));
  return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& x) {
  return FeatureMatrix(x.sample_ids(), pca_transform(model, x.rows()));
}

RowMatrix pca_reconstruct(const PcaModel& model, const RowMatrix& y) {
  if (y.cols() != model.output_dim()) throw Error(ErrorCode::DimMismatch, "reconstruction input width");
  RowMatrix out = y * model.components;
  out.rowwise() += model.mean.transpose();
  return out;
}

Eigen::VectorXd explained_variance_ratio(const PcaModel& model, double total_variance) {
  if (!(total_variance > 0.0)) throw Error(ErrorCode::ZeroVariance, "total variance is zero");
  return model.eigenvalues / total_variance;
}

}  // namespace histofilter
