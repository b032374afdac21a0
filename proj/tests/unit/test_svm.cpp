#include <doctest.h>

#include <cmath>
#include <numeric>

#include "generators.hpp"
#include "histofilter/error.hpp"
#include "histofilter/svm.hpp"
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

struct Instance {
  RowMatrix x;
  std::vector<int> y;
};

/// Two noisy 2-D clusters; labels alternate so both classes are present.
Instance clusters(Rng& rng, int n, double spread) {
  Instance in{RowMatrix(n, 2), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    const int label = i % 2 ? 1 : -1;
    in.y[static_cast<std::size_t>(i)] = label;
    in.x(i, 0) = label + gen::normal(rng, spread);
    in.x(i, 1) = 0.5 * label + gen::normal(rng, spread);
  }
  return in;
}

double kkt_residual(const SvmTrainResult& r, const Instance& in) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < in.x.rows(); ++i) {
    const double yf = in.y[static_cast<std::size_t>(i)] *
                      svm_decision(r.model, std::span<const double>(in.x.row(i).data(), 2));
    const double a = r.alpha(i);
    const double c = in.y[static_cast<std::size_t>(i)] > 0 ? r.model.c_positive : r.model.c_negative;
    if (a <= 0.0) worst = std::max(worst, 1.0 - yf);
    else if (a >= c) worst = std::max(worst, yf - 1.0);
    else worst = std::max(worst, std::abs(yf - 1.0));
  }
  return worst;
}

}  // namespace

TEST_CASE("rbf_kernel examples") {
  const std::vector<double> a = {0, 0}, b = {1, 0}, c = {3.5, -2};
  CHECK(rbf_kernel(c, c, 7.0) == 1.0);
  CHECK(rbf_kernel(a, b, 0.5) == doctest::Approx(std::exp(-0.5)));
  CHECK(rbf_kernel(a, b, 0.5) == doctest::Approx(0.60653).epsilon(1e-5));
  CHECK(rbf_kernel(a, c, 1e-12) == doctest::Approx(1.0));
  CHECK(rbf_kernel(a, c, 0.3) == rbf_kernel(c, a, 0.3));
  const std::vector<double> d3 = {1, 2, 3};
  CHECK(code_of([&] { rbf_kernel(a, d3, 1.0); }) == ErrorCode::DimMismatch);
}

TEST_CASE("property: kernel matrix is symmetric PSD") {
  auto rng = make_rng(300);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = gen::matrix(rng, 20, gen::uniform_int(rng, 1, 6));
    const double gamma = std::exp(gen::uniform(rng, -4, 2));
    Eigen::MatrixXd k(20, 20);
    for (int i = 0; i < 20; ++i)
      for (int j = 0; j < 20; ++j)
        k(i, j) = rbf_kernel(std::span<const double>(x.row(i).data(), static_cast<std::size_t>(x.cols())),
                             std::span<const double>(x.row(j).data(), static_cast<std::size_t>(x.cols())), gamma);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("symmetric pair") {
  RowMatrix x(2, 1);
  x << 1, -1;
  const std::vector<int> y = {1, -1};
  const auto r = svm_train_detailed(x, y, 10.0, 1.0);
  CHECK(r.converged);
  CHECK(r.alpha(0) == doctest::Approx(r.alpha(1)));
  CHECK(std::abs(r.model.bias) <= 1e-6);
  const std::vector<double> plus = {1}, minus = {-1}, zero = {0};
  CHECK(svm_decision(r.model, plus) > 0);
  CHECK(svm_decision(r.model, minus) < 0);
  CHECK(std::abs(svm_decision(r.model, zero)) <= 1e-6);
}

TEST_CASE("XOR reaches full training accuracy and matches the QP oracle") {
  RowMatrix x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<int> y = {-1, -1, 1, 1};
  const auto r = svm_train_detailed(x, y, 10.0, 1.0);
  for (int i = 0; i < 4; ++i)
    CHECK(is_positive(svm_decision(r.model, std::span<const double>(x.row(i).data(), 2))) == (y[static_cast<std::size_t>(i)] > 0));
  const auto ref = oracle::svm_dual_qp(x, y, 10.0, 1.0);
  CHECK(std::abs(r.objective - ref.objective) <= 1e-4);
}

TEST_CASE("property: SMO matches the dual QP oracle on small instances") {
  auto rng = make_rng(301);
  int probes = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = gen::uniform_int(rng, 4, 20);
    const auto in = clusters(rng, n, gen::uniform(rng, 0.2, 0.9));
    const double C = std::exp2(gen::uniform_int(rng, -2, 5));
    const double gamma = std::exp2(gen::uniform_int(rng, -3, 2));
    SvmTrainOptions opt;
    opt.tol = 1e-3;
    const auto r = svm_train_detailed(in.x, in.y, C, gamma, opt);
    REQUIRE(r.converged);
    const auto ref = oracle::svm_dual_qp(in.x, in.y, C, gamma);
    CHECK(r.objective >= ref.objective - 1e-4);
    CHECK(std::abs(in.y.size() ? r.model.dual_coeffs.sum() : 0.0) <= 1e-8);
    for (Eigen::Index i = 0; i < r.alpha.size(); ++i) CHECK((r.alpha(i) >= 0.0 && r.alpha(i) <= C));
    CHECK(kkt_residual(r, in) <= 1e-3);
    for (Eigen::Index i = 0; i < r.model.dual_coeffs.size(); ++i) {
      CHECK(std::abs(r.model.dual_coeffs(i)) > 0.0);
      CHECK(std::abs(r.model.dual_coeffs(i)) <= C);
    }

    // Probe grid sign agreement with a tightly converged solve.
    SvmTrainOptions tight;
    tight.tol = 1e-9;
    const auto precise = svm_train(in.x, in.y, C, gamma, tight);
    for (int gx = 0; gx <= 10; ++gx)
      for (int gy = 0; gy <= 10; ++gy) {
        const Eigen::Vector2d p(-2.5 + 0.5 * gx, -2.5 + 0.5 * gy);
        double f_ref = ref.bias;
        for (int i = 0; i < n; ++i)
          f_ref += ref.alpha(i) * in.y[static_cast<std::size_t>(i)] * oracle::rbf(in.x.row(i).transpose(), p, gamma);
        const double f = svm_decision(precise, std::span<const double>(p.data(), 2));
        CHECK(is_positive(f) == is_positive(f_ref));
        ++probes;
      }
  }
  CHECK(probes == 40 * 121);
}

TEST_CASE("property: joint scaling of features and gamma by powers of two is exact") {
  auto rng = make_rng(302);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = clusters(rng, 16, 0.7);
    const double s = std::exp2(gen::uniform_int(rng, -3, 3));
    const RowMatrix xs = in.x * s;
    const auto a = svm_train_detailed(in.x, in.y, 4.0, 0.5);
    const auto b = svm_train_detailed(xs, in.y, 4.0, 0.5 / (s * s));
    CHECK(a.alpha == b.alpha);
    CHECK(a.model.bias == b.model.bias);
    for (int k = 0; k < 30; ++k) {
      const std::vector<double> p = {gen::normal(rng, 2), gen::normal(rng, 2)};
      const std::vector<double> ps = {p[0] * s, p[1] * s};
      CHECK(svm_decision(a.model, p) == svm_decision(b.model, ps));
    }
  }
}

TEST_CASE("swap_classes negates decisions and Platt probabilities") {
  auto rng = make_rng(303);
  const auto in = clusters(rng, 20, 0.8);
  auto m = svm_train(in.x, in.y, 2.0, 1.0);
  m.platt = PlattParams{-2.0, 0.3};
  m.positive_label = "malign";
  m.negative_label = "benign";
  const auto s = swap_classes(m);
  CHECK(s.positive_label == "benign");
  for (int k = 0; k < 20; ++k) {
    const std::vector<double> p = {gen::normal(rng, 2), gen::normal(rng, 2)};
    const double f = svm_decision(m, p);
    CHECK(svm_decision(s, p) == doctest::Approx(-f));
    CHECK(svm_probability(s, -f) == doctest::Approx(1.0 - svm_probability(m, f)));
  }
}

TEST_CASE("training errors") {
  RowMatrix x(3, 1);
  x << 0, 1, 2;
  const std::vector<int> same = {1, 1, 1};
  CHECK(code_of([&] { svm_train(x, same, 1, 1); }) == ErrorCode::SingleClass);
  RowMatrix bad = x;
  bad(1, 0) = std::nan("");
  const std::vector<int> y = {1, -1, 1};
  CHECK(code_of([&] { svm_train(bad, y, 1, 1); }) == ErrorCode::NonFinite);
  const auto m = svm_train(x, y, 1, 1);
  const std::vector<double> wrong = {1, 2};
  CHECK(code_of([&] { svm_decision(m, wrong); }) == ErrorCode::DimMismatch);
  CHECK(code_of([&] { svm_probability(m, 0.0); }) == ErrorCode::BadModel);
}

TEST_CASE("tiny cache budget gives the same solution") {
  auto rng = make_rng(304);
  const auto in = clusters(rng, 20, 0.9);
  SvmTrainOptions small;
  small.cache_bytes = 1;
  const auto a = svm_train_detailed(in.x, in.y, 8.0, 0.7);
  const auto b = svm_train_detailed(in.x, in.y, 8.0, 0.7, small);
  CHECK(a.alpha == b.alpha);
}

TEST_CASE("balanced weights scale the box per class") {
  std::vector<int> y = {1, -1, -1, -1};
  SvmTrainOptions opt;
  set_balanced_weights(opt, y);
  CHECK(opt.weight_positive == doctest::Approx(2.0));
  CHECK(opt.weight_negative == doctest::Approx(4.0 / 6.0));
  RowMatrix x(4, 1);
  x << 0, 1, 2, 3;
  const auto r = svm_train_detailed(x, y, 1.0, 1.0, opt);
  CHECK(r.model.c_positive == doctest::Approx(2.0));
  for (Eigen::Index i = 1; i < 4; ++i) CHECK(r.alpha(i) <= opt.weight_negative + 1e-12);
}

TEST_CASE("platt: separated values give increasing probabilities") {
  const std::vector<double> f = {-2, -1, 1, 2};
  const std::vector<int> y = {-1, -1, 1, 1};
  const auto p = platt_fit(f, y);
  CHECK(p.A < 0);
  CHECK(platt_probability(p, 2) > platt_probability(p, 1));
  CHECK(platt_probability(p, 1) > 0.5);
  CHECK(platt_probability(p, -1) < 0.5);
}

TEST_CASE("platt: symmetric balanced instance is centred") {
  const std::vector<double> f = {-3, -1.5, -0.5, 0.5, 1.5, 3, -0.2, 0.2};
  const std::vector<int> y = {-1, -1, 1, -1, 1, 1, 1, -1};
  const auto p = platt_fit(f, y);
  CHECK(std::abs(platt_probability(p, 0.0) - 0.5) <= 1e-3);
}

TEST_CASE("platt: labels independent of values give A near 0 and the prior") {
  auto rng = make_rng(305);
  std::vector<double> f;
  std::vector<int> y;
  int pos = 0;
  for (int i = 0; i < 4000; ++i) {
    f.push_back(gen::normal(rng, 1.0));
    const int label = gen::uniform(rng, 0, 1) < 0.3 ? 1 : -1;
    pos += label > 0;
    y.push_back(label);
  }
  const auto p = platt_fit(f, y);
  CHECK(std::abs(p.A) <= 0.1);
  CHECK(std::abs(platt_probability(p, 0.0) - pos / 4000.0) <= 0.02);
}

TEST_CASE("platt: errors") {
  const std::vector<double> f = {1, 1, 1};
  const std::vector<int> y = {1, -1, 1};
  CHECK(code_of([&] { platt_fit(f, y); }) == ErrorCode::Degenerate);
  const std::vector<double> g = {1, 2, 3};
  const std::vector<int> one = {1, 1, 1};
  CHECK(code_of([&] { platt_fit(g, one); }) == ErrorCode::SingleClass);
}

TEST_CASE("default grids") {
  const auto c = default_c_grid();
  const auto g = default_gamma_grid();
  REQUIRE(c.size() == 11);
  REQUIRE(g.size() == 10);
  CHECK(c.front() == std::exp2(-5));
  CHECK(c.back() == std::exp2(15));
  CHECK(g.front() == std::exp2(-15));
  CHECK(g.back() == std::exp2(3));
}

TEST_CASE("stratified_folds: balanced per class and deterministic") {
  std::vector<int> y;
  for (int i = 0; i < 23; ++i) y.push_back(i < 9 ? 1 : -1);
  const auto f = stratified_folds(y, 5, 7);
  CHECK(f == stratified_folds(y, 5, 7));
  for (int label : {1, -1}) {
    std::array<int, 5> count{};
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == label) count[static_cast<std::size_t>(f[i])] += 1;
    CHECK(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()) <= 1);
  }
}

TEST_CASE("grid_search: singleton, separable, deterministic, tie-break") {
  auto rng = make_rng(306);
  const auto in = clusters(rng, 40, 0.15);
  GridSearchOptions one;
  one.c_grid = {3.0};
  one.gamma_grid = {0.25};
  const auto s = grid_search(in.x, in.y, one);
  CHECK(s.best_C == 3.0);
  CHECK(s.best_gamma == 0.25);
  REQUIRE(s.grid.size() == 1);
  CHECK(s.cv_accuracy == 1.0);

  GridSearchOptions opt;
  opt.c_grid = {0.5, 1, 4, 32};
  opt.gamma_grid = {0.1, 0.5, 2};
  opt.seed = 11;
  const auto a = grid_search(in.x, in.y, opt);
  const auto b = grid_search(in.x, in.y, opt);
  CHECK(a.best_C == b.best_C);
  CHECK(a.best_gamma == b.best_gamma);
  CHECK(a.cv_accuracy == 1.0);
  REQUIRE(a.grid.size() == 12);
  for (std::size_t i = 0; i < a.grid.size(); ++i) CHECK(a.grid[i].mean_cv_accuracy == b.grid[i].mean_cv_accuracy);
  // separable at every cell, so the tie goes to the smallest C and gamma
  const double best = std::max_element(a.grid.begin(), a.grid.end(), [](auto& l, auto& r) {
                        return l.mean_cv_accuracy < r.mean_cv_accuracy;
                      })->mean_cv_accuracy;
  for (const auto& cell : a.grid) {
    if (cell.mean_cv_accuracy != best) continue;
    CHECK(a.best_C <= cell.C);
    if (cell.C == a.best_C) CHECK(a.best_gamma <= cell.gamma);
  }
  CHECK(code_of([&] {
          GridSearchOptions f = opt;
          f.folds = 1;
          grid_search(in.x, in.y, f);
        }) == ErrorCode::InvalidArgument);
}

TEST_CASE("cross_val_decisions: single-class training split gives constants") {
  RowMatrix x(4, 1);
  x << 0, 1, 2, 3;
  const std::vector<int> y = {1, 1, -1, 1};
  const std::vector<int> fold = {0, 0, 1, 1};  // fold 0 trains on {-1, +1}; fold 1 trains on {+1, +1}
  const auto d = cross_val_decisions(x, y, fold, 1.0, 1.0, {});
  CHECK(d(2) == 1.0);
  CHECK(d(3) == 1.0);
}
