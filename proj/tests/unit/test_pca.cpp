#include <doctest.h>

#include <cmath>

#include "generators.hpp"
#include "histofilter/error.hpp"
#include "histofilter/pca.hpp"
#include "oracles.hpp"

using namespace histofilter;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::UsageError;
}

RowMatrix rows(std::initializer_list<std::initializer_list<double>> data) {
  RowMatrix m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : data) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Eigen::MatrixXd population_covariance(const RowMatrix& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows());
}

double reconstruction_error(const RowMatrix& x, Eigen::Index k) {
  const auto m = pca_fit(x, k);
  return (pca_reconstruct(m, pca_transform(m, x)) - x).squaredNorm();
}

}  // namespace

TEST_CASE("pca: two points on an axis") {
  const auto x = rows({{1, 0}, {-1, 0}});
  const auto m = pca_fit(x, 1);
  CHECK(m.components(0, 0) == doctest::Approx(1.0));
  CHECK(m.components(0, 1) == doctest::Approx(0.0));
  CHECK(m.eigenvalues(0) == doctest::Approx(1.0));
  CHECK(explained_variance_ratio(m)(0) == doctest::Approx(1.0));
  const auto y = pca_transform(m, rows({{3, 0}}));
  CHECK(y(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("pca: rotated by 45 degrees") {
  const double h = std::sqrt(0.5);
  const auto m = pca_fit(rows({{h, h}, {-h, -h}}), 1);
  CHECK(m.components(0, 0) == doctest::Approx(h));
  CHECK(m.components(0, 1) == doctest::Approx(h));
}

TEST_CASE("pca: full rank reconstruction, mean maps to zero, norm preserved") {
  auto rng = make_rng(200);
  const auto x = gen::matrix(rng, 50, 8);
  const auto m = pca_fit(x, 8);
  CHECK((pca_reconstruct(m, pca_transform(m, x)) - x).cwiseAbs().maxCoeff() <= 1e-8);
  RowMatrix mean_row = m.mean.transpose();
  CHECK(pca_transform(m, mean_row).cwiseAbs().maxCoeff() <= 1e-12);
  const RowMatrix centered = x.rowwise() - m.mean.transpose();
  const auto y = pca_transform(m, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) CHECK(std::abs(y.row(i).norm() - centered.row(i).norm()) <= 1e-8);
}

TEST_CASE("explained variance: 1-D data embedded in 3-D") {
  RowMatrix x(6, 3);
  for (int i = 0; i < 6; ++i) x.row(i) << i * 1.0, i * 2.0, i * -0.5;
  const auto r = explained_variance_ratio(pca_fit(x, 2));
  CHECK(r(0) == doctest::Approx(1.0));
  CHECK(std::abs(r(1)) <= 1e-10);
}

TEST_CASE("explained variance: isotropic 2-D Gaussian") {
  auto rng = make_rng(201);
  const auto r = explained_variance_ratio(pca_fit(gen::matrix(rng, 4000, 2), 2));
  CHECK(std::abs(r(0) - 0.5) <= 0.05);
  CHECK(std::abs(r(1) - 0.5) <= 0.05);
}

TEST_CASE("pca: errors") {
  auto rng = make_rng(202);
  const auto x = gen::matrix(rng, 5, 3);
  CHECK(code_of([&] { pca_fit(x, 4); }) == ErrorCode::KTooLarge);
  CHECK(code_of([&] { pca_fit(x, 0); }) == ErrorCode::KTooLarge);
  CHECK(code_of([&] { pca_fit(gen::matrix(rng, 3, 10), 3); }) == ErrorCode::KTooLarge);  // k > n-1
  CHECK(code_of([&] { pca_fit(gen::matrix(rng, 1, 3), 1); }) == ErrorCode::InvalidArgument);
  const auto m = pca_fit(x, 2);
  CHECK(code_of([&] { pca_transform(m, gen::matrix(rng, 2, 4)); }) == ErrorCode::DimMismatch);
  RowMatrix constant = RowMatrix::Constant(4, 3, 2.5);
  const auto cm = pca_fit(constant, 1);
  CHECK(code_of([&] { explained_variance_ratio(cm); }) == ErrorCode::ZeroVariance);
}

TEST_CASE("property: orthonormal rows, sorted eigenvalues, sign convention, oracle subspace") {
  auto rng = make_rng(203);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = gen::uniform_int(rng, 3, 50);
    const int d = gen::uniform_int(rng, 1, 20);
    RowMatrix x = gen::matrix(rng, n, d);
    for (int j = 0; j < d; ++j) x.col(j) *= gen::uniform(rng, 0.2, 3.0);
    const int k = gen::uniform_int(rng, 1, std::min(n - 1, d));
    const auto m = pca_fit(x, k);
    REQUIRE(m.output_dim() == k);
    const Eigen::MatrixXd gram = m.components * m.components.transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() <= 1e-8);
    for (Eigen::Index i = 0; i < k; ++i) {
      CHECK(m.eigenvalues(i) >= 0.0);
      if (i > 0) CHECK(m.eigenvalues(i) <= m.eigenvalues(i - 1));
      Eigen::Index arg = 0;
      m.components.row(i).cwiseAbs().maxCoeff(&arg);
      CHECK(m.components(i, arg) > 0.0);
    }
    const auto ref = oracle::jacobi_eigen(population_covariance(x));
    for (Eigen::Index i = 0; i < k; ++i) CHECK(std::abs(m.eigenvalues(i) - ref.values(i)) <= 1e-8 * (1.0 + ref.values(0)));
    CHECK(m.total_variance == doctest::Approx(ref.values.sum()).epsilon(1e-10));
    // Compare subspaces only where the spectrum separates them.
    const bool gap = k == d || ref.values(k - 1) - ref.values(k) > 1e-6 * (1.0 + ref.values(0));
    if (gap) {
      const Eigen::MatrixXd mine = m.components;
      const Eigen::MatrixXd theirs = ref.vectors.leftCols(k).transpose();
      CHECK(oracle::projector_distance(mine, theirs) <= 1e-6);
    }
    const auto r = explained_variance_ratio(m);
    CHECK(r.sum() <= 1.0 + 1e-9);
  }
}

TEST_CASE("property: residual orthogonality and monotone error in k") {
  auto rng = make_rng(204);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = gen::uniform_int(rng, 10, 40);
    const int d = gen::uniform_int(rng, 2, 12);
    const auto x = gen::matrix(rng, n, d);
    const int k = gen::uniform_int(rng, 1, d);
    const auto m = pca_fit(x, k);
    const auto xhat = pca_reconstruct(m, pca_transform(m, x));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dot = (x.row(i) - xhat.row(i)).dot(xhat.row(i) - m.mean.transpose());
      CHECK(std::abs(dot) <= 1e-6);
    }
    double prev = std::numeric_limits<double>::infinity();
    for (int kk = 1; kk <= d; ++kk) {
      const double e = reconstruction_error(x, kk);
      CHECK(e <= prev + 1e-9);
      prev = e;
    }
  }
}

TEST_CASE("pca: Gram route when d > n matches covariance route") {
  auto rng = make_rng(205);
  const auto x = gen::matrix(rng, 12, 30);
  const auto m = pca_fit(x, 5);
  const auto ref = oracle::jacobi_eigen(population_covariance(x));
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(m.eigenvalues(i) == doctest::Approx(ref.values(i)).epsilon(1e-9));
  const Eigen::MatrixXd mine = m.components;
  const Eigen::MatrixXd theirs = ref.vectors.leftCols(5).transpose();
  CHECK(oracle::projector_distance(mine, theirs) <= 1e-6);
}
