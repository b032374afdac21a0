#include "histofilter/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>

#include <fmt/format.h>

#include "histofilter/error.hpp"
#include "histofilter/parallel.hpp"

namespace histofilter {

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimMismatch, fmt::format("{} vs {}", x.size(), y.size()));
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x[i] - y[i];
    d2 += t * t;
  }
  return std::exp(-gamma * d2);
}

namespace {

/// LRU cache of rows of Q = diag(y) K diag(y) within a byte budget (at
/// least two rows so the pair being updated stays resident).
class KernelCache {
 public:
  KernelCache(const RowMatrix& x, std::span<const int> y, double gamma, std::size_t budget)
      : x_(x), y_(y), gamma_(gamma), n_(static_cast<std::size_t>(x.rows())), rows_(n_), where_(n_) {
    sq_norms_ = x.rowwise().squaredNorm();
    const std::size_t row_bytes = std::max<std::size_t>(1, n_ * sizeof(double));
    capacity_ = std::max<std::size_t>(2, budget / row_bytes);
  }

  const std::vector<double>& row(std::size_t i) {
    if (!rows_[i].empty()) {
      lru_.splice(lru_.begin(), lru_, where_[i]);
      return rows_[i];
    }
    if (lru_.size() >= capacity_) {
      const auto victim = lru_.back();
      lru_.pop_back();
      std::vector<double>().swap(rows_[victim]);
    }
    auto& r = rows_[i];
    r.resize(n_);
    const Eigen::VectorXd dots = x_ * x_.row(static_cast<Eigen::Index>(i)).transpose();
    const double si = sq_norms_(static_cast<Eigen::Index>(i));
    for (std::size_t k = 0; k < n_; ++k) {
      const double d2 = std::max(0.0, si + sq_norms_(static_cast<Eigen::Index>(k)) - 2.0 * dots(static_cast<Eigen::Index>(k)));
      r[k] = static_cast<double>(y_[i] * y_[k]) * std::exp(-gamma_ * d2);
    }
    r[i] = 1.0;  // exact diagonal
    lru_.push_front(i);
    where_[i] = lru_.begin();
    return r;
  }

 private:
  const RowMatrix& x_;
  std::span<const int> y_;
  double gamma_;
  std::size_t n_;
  Eigen::VectorXd sq_norms_;
  std::size_t capacity_ = 2;
  std::vector<std::vector<double>> rows_;
  std::list<std::size_t> lru_;
  std::vector<std::list<std::size_t>::iterator> where_;
};

constexpr double kTau = 1e-12;

}  // namespace

void set_balanced_weights(SvmTrainOptions& options, std::span<const int> y) {
  const auto pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const auto neg = static_cast<double>(y.size()) - pos;
  if (pos == 0 || neg == 0) return;
  const double n = pos + neg;
  options.weight_positive = n / (2.0 * pos);
  options.weight_negative = n / (2.0 * neg);
}

SvmTrainResult svm_train_detailed(const RowMatrix& x, std::span<const int> y, double C, double gamma,
                                  const SvmTrainOptions& options) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (y.size() != n) throw Error(ErrorCode::DimMismatch, fmt::format("{} labels for {} rows", y.size(), n));
  if (!(C > 0.0) || !(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "C and gamma must be positive");
  if (!x.allFinite()) throw Error(ErrorCode::NonFinite, "training features contain NaN or infinity");
  std::size_t n_pos = 0;
  for (int label : y) {
    if (label != 1 && label != -1) throw Error(ErrorCode::InvalidArgument, "labels must be +1 or -1");
    n_pos += label == 1;
  }
  if (n_pos == 0 || n_pos == n) throw Error(ErrorCode::SingleClass, "training labels contain one class only");

  const double cp = C * options.weight_positive;
  const double cn = C * options.weight_negative;
  auto bound = [&](std::size_t t) { return y[t] > 0 ? cp : cn; };

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // G = Q alpha - e
  KernelCache cache(x, y, gamma, options.cache_bytes);

  const long max_iter = static_cast<long>(std::max<int>(1, options.max_passes)) *
                        static_cast<long>(std::max<std::size_t>(n, 100));
  SvmTrainResult result;
  double gmax = 0.0;
  double gmin = 0.0;
  long iter = 0;
  for (; iter < max_iter; ++iter) {
    // Maximal violating pair.
    long i = -1;
    long j = -1;
    gmax = -std::numeric_limits<double>::infinity();
    gmin = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -static_cast<double>(y[t]) * grad[t];
      const bool up = y[t] > 0 ? alpha[t] < bound(t) : alpha[t] > 0.0;
      const bool low = y[t] > 0 ? alpha[t] > 0.0 : alpha[t] < bound(t);
      if (up && v > gmax) {
        gmax = v;
        i = static_cast<long>(t);
      }
      if (low && v < gmin) {
        gmin = v;
        j = static_cast<long>(t);
      }
    }
    if (i < 0 || j < 0 || gmax - gmin < options.tol) {
      result.converged = true;
      break;
    }

    const auto ui = static_cast<std::size_t>(i);
    const auto uj = static_cast<std::size_t>(j);
    const auto& qi = cache.row(ui);
    const auto& qj = cache.row(uj);
    const double ci = bound(ui);
    const double cj = bound(uj);
    const double old_ai = alpha[ui];
    const double old_aj = alpha[uj];

    if (y[ui] != y[uj]) {
      double quad = qi[ui] + qj[uj] + 2.0 * qi[uj];
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[ui] - grad[uj]) / quad;
      const double diff = alpha[ui] - alpha[uj];
      alpha[ui] += delta;
      alpha[uj] += delta;
      if (diff > 0) {
        if (alpha[uj] < 0) {
          alpha[uj] = 0;
          alpha[ui] = diff;
        }
      } else if (alpha[ui] < 0) {
        alpha[ui] = 0;
        alpha[uj] = -diff;
      }
      if (diff > ci - cj) {
        if (alpha[ui] > ci) {
          alpha[ui] = ci;
          alpha[uj] = ci - diff;
        }
      } else if (alpha[uj] > cj) {
        alpha[uj] = cj;
        alpha[ui] = cj + diff;
      }
    } else {
      double quad = qi[ui] + qj[uj] - 2.0 * qi[uj];
      if (quad <= 0) quad = kTau;
      const double delta = (grad[ui] - grad[uj]) / quad;
      const double sum = alpha[ui] + alpha[uj];
      alpha[ui] -= delta;
      alpha[uj] += delta;
      if (sum > ci) {
        if (alpha[ui] > ci) {
          alpha[ui] = ci;
          alpha[uj] = sum - ci;
        }
      } else if (alpha[uj] < 0) {
        alpha[uj] = 0;
        alpha[ui] = sum;
      }
      if (sum > cj) {
        if (alpha[uj] > cj) {
          alpha[uj] = cj;
          alpha[ui] = sum - cj;
        }
      } else if (alpha[ui] < 0) {
        alpha[ui] = 0;
        alpha[uj] = sum;
      }
    }

    const double dai = alpha[ui] - old_ai;
    const double daj = alpha[uj] - old_aj;
    for (std::size_t k = 0; k < n; ++k) grad[k] += qi[k] * dai + qj[k] * daj;
  }
  result.iterations = iter;
  result.violation = gmax - gmin;

  // rho: mean of y*G over free vectors, else midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = static_cast<double>(y[t]) * grad[t];
    const bool at_upper = alpha[t] >= bound(t);
    const bool at_lower = alpha[t] <= 0.0;
    if (at_upper) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (at_lower) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

  double linear = 0.0;
  double quadratic = 0.0;  // alpha'Q alpha = alpha'(G + e)
  for (std::size_t t = 0; t < n; ++t) {
    linear += alpha[t];
    quadratic += alpha[t] * (grad[t] + 1.0);
  }
  result.objective = linear - 0.5 * quadratic;

  auto& model = result.model;
  model.gamma = gamma;
  model.C = C;
  model.c_positive = cp;
  model.c_negative = cn;
  model.bias = -rho;
  model.positive_label = options.positive_label;
  model.negative_label = options.negative_label;
  std::vector<std::size_t> sv;
  for (std::size_t t = 0; t < n; ++t)
    if (alpha[t] > 0.0) sv.push_back(t);
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.dual_coeffs.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    model.support_vectors.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(sv[k]));
    model.dual_coeffs(static_cast<Eigen::Index>(k)) = alpha[sv[k]] * static_cast<double>(y[sv[k]]);
  }
  result.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(n));
  return result;
}

double svm_decision(const SvmModel& model, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != model.dim())
    throw Error(ErrorCode::DimMismatch, fmt::format("model dim {}, input {}", model.dim(), x.size()));
  double f = model.bias;
  const auto d = static_cast<std::size_t>(model.dim());
  for (Eigen::Index k = 0; k < model.support_vectors.rows(); ++k) {
    const double* sv = model.support_vectors.row(k).data();
    f += model.dual_coeffs(k) * rbf_kernel(std::span<const double>(sv, d), x, model.gamma);
  }
  return f;
}

Eigen::VectorXd svm_decision(const SvmModel& model, const RowMatrix& x) {
  if (x.cols() != model.dim())
    throw Error(ErrorCode::DimMismatch, fmt::format("model dim {}, input {}", model.dim(), x.cols()));
  Eigen::VectorXd out(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  parallel_for_index(static_cast<std::size_t>(x.rows()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    out(r) = svm_decision(model, std::span<const double>(x.row(r).data(), d));
  });
  return out;
}

double svm_probability(const SvmModel& model, double decision) {
  if (!model.platt) throw Error(ErrorCode::BadModel, "model has no probability calibration");
  return platt_probability(*model.platt, decision);
}

SvmModel swap_classes(const SvmModel& model) {
  SvmModel out = model;
  out.dual_coeffs = -model.dual_coeffs;
  out.bias = -model.bias;
  std::swap(out.positive_label, out.negative_label);
  std::swap(out.c_positive, out.c_negative);
  if (model.platt) out.platt = PlattParams{model.platt->A, -model.platt->B};
  return out;
}

}  // namespace histofilter
