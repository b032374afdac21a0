#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "histofilter/error.hpp"
#include "histofilter/parallel.hpp"
#include "histofilter/random.hpp"
#include "histofilter/svm.hpp"

namespace histofilter {

namespace {

std::vector<double> pow2_range(int lo, int hi, int step) {
  std::vector<double> out;
  for (int e = lo; e <= hi; e += step) out.push_back(std::ldexp(1.0, e));
  return out;
}

struct Split {
  RowMatrix x;
  std::vector<int> y;
};

Split take(const RowMatrix& x, std::span<const int> y, std::span<const int> fold_of, int fold, bool inside) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < y.size(); ++i)
    if ((fold_of[i] == fold) == inside) idx.push_back(static_cast<Eigen::Index>(i));
  Split s;
  s.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
  s.y.reserve(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    s.x.row(static_cast<Eigen::Index>(k)) = x.row(idx[k]);
    s.y.push_back(y[static_cast<std::size_t>(idx[k])]);
  }
  return s;
}

bool single_class(const std::vector<int>& y) {
  return std::all_of(y.begin(), y.end(), [&](int v) { return v == y.front(); });
}

}  // namespace

std::vector<double> default_c_grid() { return pow2_range(-5, 15, 2); }
std::vector<double> default_gamma_grid() { return pow2_range(-15, 3, 2); }

std::vector<int> stratified_folds(std::span<const int> y, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least two folds");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  std::vector<int> fold_of(y.size(), 0);
  int next = 0;
  for (auto& [label, idx] : by_class) {
    auto rng = make_rng(seed, {static_cast<std::uint64_t>(static_cast<std::int64_t>(label))});
    shuffle_in_place(idx, rng);
    // Continue dealing where the previous class stopped so fold sizes stay level.
    for (auto i : idx) {
      fold_of[i] = next;
      next = (next + 1) % folds;
    }
  }
  return fold_of;
}

Eigen::VectorXd cross_val_decisions(const RowMatrix& x, std::span<const int> y, std::span<const int> fold_of,
                                    double C, double gamma, const SvmTrainOptions& options) {
  if (fold_of.size() != y.size() || static_cast<Eigen::Index>(y.size()) != x.rows())
    throw Error(ErrorCode::DimMismatch, "fold assignment length");
  const int folds = fold_of.empty() ? 0 : *std::max_element(fold_of.begin(), fold_of.end()) + 1;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
  for (int k = 0; k < folds; ++k) {
    const auto train = take(x, y, fold_of, k, false);
    const auto test = take(x, y, fold_of, k, true);
    if (test.y.empty()) continue;
    Eigen::VectorXd dec;
    if (train.y.empty()) {
      dec = Eigen::VectorXd::Ones(test.x.rows());
    } else if (single_class(train.y)) {
      dec = Eigen::VectorXd::Constant(test.x.rows(), static_cast<double>(train.y.front()));
    } else {
      dec = svm_decision(svm_train(train.x, train.y, C, gamma, options), test.x);
    }
    Eigen::Index j = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (fold_of[i] == k) out(static_cast<Eigen::Index>(i)) = dec(j++);
  }
  return out;
}

GridSearchResult grid_search(const RowMatrix& x, std::span<const int> y, const GridSearchOptions& options) {
  if (options.c_grid.empty() || options.gamma_grid.empty())
    throw Error(ErrorCode::InvalidArgument, "empty hyperparameter grid");
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) throw Error(ErrorCode::DimMismatch, "labels vs rows");
  const auto fold_of = stratified_folds(y, options.folds, options.seed);

  // Splits are shared by every cell.
  std::vector<Split> train(static_cast<std::size_t>(options.folds));
  std::vector<Split> test(static_cast<std::size_t>(options.folds));
  for (int k = 0; k < options.folds; ++k) {
    train[static_cast<std::size_t>(k)] = take(x, y, fold_of, k, false);
    test[static_cast<std::size_t>(k)] = take(x, y, fold_of, k, true);
  }

  const std::size_t nc = options.c_grid.size();
  const std::size_t ng = options.gamma_grid.size();
  GridSearchResult result;
  result.grid.resize(nc * ng);
  parallel_for_index(nc * ng, [&](std::size_t cell) {
    const double C = options.c_grid[cell / ng];
    const double gamma = options.gamma_grid[cell % ng];
    double acc_sum = 0.0;
    int used = 0;
    for (std::size_t k = 0; k < train.size(); ++k) {
      const auto& te = test[k];
      if (te.y.empty()) continue;
      const auto& tr = train[k];
      std::size_t correct = 0;
      if (single_class(tr.y)) {
        for (int label : te.y) correct += label == tr.y.front();
      } else {
        const auto model = svm_train(tr.x, tr.y, C, gamma, options.train);
        const auto dec = svm_decision(model, te.x);
        for (std::size_t i = 0; i < te.y.size(); ++i)
          correct += (is_positive(dec(static_cast<Eigen::Index>(i))) ? 1 : -1) == te.y[i];
      }
      acc_sum += static_cast<double>(correct) / static_cast<double>(te.y.size());
      ++used;
    }
    result.grid[cell] = GridCell{C, gamma, used ? acc_sum / used : 0.0};
  });

  const GridCell* best = nullptr;
  for (const auto& cell : result.grid) {
    if (!best || cell.mean_cv_accuracy > best->mean_cv_accuracy ||
        (cell.mean_cv_accuracy == best->mean_cv_accuracy &&
         (cell.C < best->C || (cell.C == best->C && cell.gamma < best->gamma))))
      best = &cell;
  }
  result.best_C = best->C;
  result.best_gamma = best->gamma;
  result.cv_accuracy = best->mean_cv_accuracy;
  return result;
}

}  // namespace histofilter
