#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "histofilter/error.hpp"
#include "histofilter/svm.hpp"

namespace histofilter {

namespace {

// Negative log-likelihood term, written to avoid overflow for either sign.
double nll_term(double t, double fApB) {
  return fApB >= 0 ? t * fApB + std::log1p(std::exp(-fApB)) : (t - 1.0) * fApB + std::log1p(std::exp(fApB));
}

}  // namespace

double platt_probability(const PlattParams& p, double decision) noexcept {
  const double fApB = decision * p.A + p.B;
  if (fApB >= 0) {
    const double e = std::exp(-fApB);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(fApB));
}

PlattParams platt_fit(std::span<const double> f, std::span<const int> y) {
  if (f.size() != y.size()) throw Error(ErrorCode::DimMismatch, fmt::format("{} values, {} labels", f.size(), y.size()));
  double prior1 = 0;
  double prior0 = 0;
  for (int label : y) (label > 0 ? prior1 : prior0) += 1;
  if (prior1 == 0 || prior0 == 0) throw Error(ErrorCode::SingleClass, "calibration labels contain one class only");
  for (double v : f)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "decision value");
  const auto [lo_it, hi_it] = std::minmax_element(f.begin(), f.end());
  if (*lo_it == *hi_it) throw Error(ErrorCode::Degenerate, "all decision values are equal");

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;
  const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo_target = 1.0 / (prior0 + 2.0);
  const std::size_t n = f.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] > 0 ? hi_target : lo_target;

  double A = 0.0;
  double B = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = 0.0;
  for (std::size_t i = 0; i < n; ++i) fval += nll_term(t[i], f[i] * A + B);

  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fApB = f[i] * A + B;
      double p, q;
      if (fApB >= 0) {
        const double e = std::exp(-fApB);
        p = e / (1.0 + e);
        q = 1.0 / (1.0 + e);
      } else {
        const double e = std::exp(fApB);
        p = 1.0 / (1.0 + e);
        q = e / (1.0 + e);
      }
      const double d2 = p * q;
      h11 += f[i] * f[i] * d2;
      h22 += d2;
      h21 += f[i] * d2;
      const double d1 = t[i] - p;
      g1 += f[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;

    const double det = h11 * h22 - h21 * h21;
    const double dA = -(h22 * g1 - h21 * g2) / det;
    const double dB = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * dA + g2 * dB;
    double step = 1.0;
    while (step >= kMinStep) {
      const double nA = A + step * dA;
      const double nB = B + step * dB;
      double nf = 0.0;
      for (std::size_t i = 0; i < n; ++i) nf += nll_term(t[i], f[i] * nA + nB);
      if (nf < fval + 1e-4 * step * gd) {
        A = nA;
        B = nB;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;  // line search stalled; keep the best point
  }
  return PlattParams{A, B};
}

}  // namespace histofilter
