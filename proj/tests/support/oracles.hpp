#pragma once

// Independent reference implementations used only by the tests.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "histofilter/pftas.hpp"

namespace oracle {

/// Neighbour counts by a direct 3x3 scan with explicit bounds checks.
histofilter::TasHistogram tas_histogram(const histofilter::BinaryMask& mask);

/// Exhaustive argmax of w0*w1*(mu0-mu1)^2 over every t in [0, 255] with exact
/// rational arithmetic; ties go to the smallest t. When no split has positive
/// variance (single occupied value) the lowest occupied value is returned.
int otsu_threshold(std::span<const std::uint64_t, 256> histogram);

/// Direct transcription of the descriptor definition: naive histograms, naive
/// Otsu, two-pass mean and population deviation.
histofilter::PftasVector pftas(const histofilter::RgbImage& image);

struct Eigen_ {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns
};

/// Cyclic Jacobi rotations on a symmetric matrix.
Eigen_ jacobi_eigen(Eigen::MatrixXd a, double tol = 1e-14, int max_sweeps = 100);

/// Frobenius norm of the difference of the orthogonal projectors onto the row
/// spaces of a and b; bounds sin of the largest principal angle.
double projector_distance(const Eigen::MatrixXd& a_rows, const Eigen::MatrixXd& b_rows);

struct DualSolution {
  Eigen::VectorXd alpha;
  double objective = 0.0;
  double bias = 0.0;
};

/// Accelerated projected gradient (FISTA) on the C-SVM dual; the projection
/// onto {0 <= a <= C, y'a = 0} is found by bisection on the multiplier.
DualSolution svm_dual_qp(const Eigen::MatrixXd& x, std::span<const int> y, double C, double gamma,
                         int iterations = 20000);

double rbf(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma);

}  // namespace oracle
