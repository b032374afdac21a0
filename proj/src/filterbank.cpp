#include "histofilter/filterbank.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "csv.hpp"
#include "histofilter/error.hpp"
#include "histofilter/parallel.hpp"
#include "histofilter/random.hpp"
#include "io_util.hpp"

namespace histofilter {

namespace {

constexpr std::array<std::pair<FeatureKind, std::string_view>, 5> kKindNames = {{
    {FeatureKind::pftas, "pftas"},
    {FeatureKind::deep_pca_100, "deep_pca_100"},
    {FeatureKind::deep_pca_200, "deep_pca_200"},
    {FeatureKind::deep_pca_400, "deep_pca_400"},
    {FeatureKind::deep_pca_600, "deep_pca_600"},
}};

RowMatrix gather(const RowMatrix& x, std::span<const std::size_t> rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
  return out;
}

double accuracy(const Eigen::VectorXd& decisions, std::span<const int> y) {
  if (y.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i)
    correct += (is_positive(decisions(static_cast<Eigen::Index>(i))) ? 1 : -1) == y[i];
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

}  // namespace

std::string_view to_string(FeatureKind kind) noexcept {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "pftas";
}

std::optional<FeatureKind> parse_feature_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames)
    if (name == text) return k;
  return std::nullopt;
}

std::optional<int> pca_dim(FeatureKind kind) noexcept {
  switch (kind) {
    case FeatureKind::pftas: return std::nullopt;
    case FeatureKind::deep_pca_100: return 100;
    case FeatureKind::deep_pca_200: return 200;
    case FeatureKind::deep_pca_400: return 400;
    case FeatureKind::deep_pca_600: return 600;
  }
  return std::nullopt;
}

IndexSplit stratified_validation_split(std::span<const int> labels, double fraction, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  IndexSplit out;
  for (auto& [label, idx] : by_label) {
    auto rng = make_rng(seed, {0x5641u, static_cast<std::uint64_t>(static_cast<std::int64_t>(label))});
    shuffle_in_place(idx, rng);
    const auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idx.size())));
    out.validation.insert(out.validation.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  return out;
}

FilterModel train_filter(const FeatureMatrix& source_features, const DatasetManifest& relabeled, FeatureKind kind,
                         const FilterTrainOptions& options) {
  if (!(options.val_fraction > 0.0 && options.val_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "val_fraction must lie in (0, 1)");
  const auto rows = join_rows(relabeled, source_features);

  std::vector<int> labels(relabeled.size());
  for (std::size_t i = 0; i < relabeled.size(); ++i) {
    const auto b = relabeled.records()[i].binary_label;
    if (b != BinaryLabel::relevant && b != BinaryLabel::irrelevant)
      throw Error(ErrorCode::InvalidArgument,
                  fmt::format("record '{}' has no relevance label", relabeled.records()[i].sample_id));
    labels[i] = b == BinaryLabel::relevant ? 1 : -1;
  }
  if (std::all_of(labels.begin(), labels.end(), [&](int v) { return v == labels.front(); }))
    throw Error(ErrorCode::SingleClass, "relabeled manifest holds only one relevance class");

  const auto split = stratified_validation_split(labels, options.val_fraction, options.seed);
  std::vector<std::size_t> train_rows, val_rows;
  std::vector<int> y_train, y_val;
  for (auto i : split.train) {
    train_rows.push_back(rows[i]);
    y_train.push_back(labels[i]);
  }
  for (auto i : split.validation) {
    val_rows.push_back(rows[i]);
    y_val.push_back(labels[i]);
  }

  RowMatrix x_train = gather(source_features.rows(), train_rows);
  RowMatrix x_val = gather(source_features.rows(), val_rows);

  FilterModel model;
  model.scenario = options.scenario;
  model.feature_kind = kind;
  if (const auto k = pca_dim(kind)) {
    model.pca = pca_fit(x_train, *k);
    x_train = pca_transform(*model.pca, x_train);
    x_val = pca_transform(*model.pca, x_val);
  }

  GridSearchOptions grid = options.grid;
  grid.seed = options.seed;
  grid.train.positive_label = "relevant";
  grid.train.negative_label = "irrelevant";
  const auto cv = grid_search(x_train, y_train, grid);

  // Refit every cell on the whole training part and score it on validation.
  std::vector<SvmModel> fitted(cv.grid.size());
  std::vector<double> val_acc(cv.grid.size(), 0.0);
  parallel_for_index(cv.grid.size(), [&](std::size_t c) {
    fitted[c] = svm_train(x_train, y_train, cv.grid[c].C, cv.grid[c].gamma, grid.train);
    val_acc[c] = y_val.empty() ? 0.0 : accuracy(svm_decision(fitted[c], x_val), y_val);
  });
  std::size_t best = 0;
  for (std::size_t c = 1; c < cv.grid.size(); ++c) {
    const auto& a = cv.grid[c];
    const auto& b = cv.grid[best];
    if (val_acc[c] != val_acc[best]) {
      if (val_acc[c] > val_acc[best]) best = c;
    } else if (a.mean_cv_accuracy != b.mean_cv_accuracy) {
      if (a.mean_cv_accuracy > b.mean_cv_accuracy) best = c;
    } else if (a.C < b.C || (a.C == b.C && a.gamma < b.gamma)) {
      best = c;
    }
  }
  model.svm = std::move(fitted[best]);
  model.validation_accuracy = val_acc[best];
  model.cv_accuracy = cv.grid[best].mean_cv_accuracy;
  return model;
}

Eigen::VectorXd filter_decisions(const FilterModel& filter, const FeatureMatrix& patch_features) {
  if (filter.pca) {
    if (patch_features.dim() != filter.pca->input_dim())
      throw Error(ErrorCode::DimMismatch,
                  fmt::format("filter expects {} features, got {}", filter.pca->input_dim(), patch_features.dim()));
    return svm_decision(filter.svm, pca_transform(*filter.pca, patch_features.rows()));
  }
  if (patch_features.dim() != filter.svm.dim())
    throw Error(ErrorCode::DimMismatch,
                fmt::format("filter expects {} features, got {}", filter.svm.dim(), patch_features.dim()));
  return svm_decision(filter.svm, patch_features.rows());
}

FilterPartition apply_filter(const FilterModel& filter, const FeatureMatrix& patch_features) {
  const auto dec = filter_decisions(filter, patch_features);
  FilterPartition out;
  for (std::size_t i = 0; i < patch_features.size(); ++i)
    (is_positive(dec(static_cast<Eigen::Index>(i))) ? out.relevant : out.irrelevant)
        .insert(patch_features.sample_ids()[i]);
  return out;
}

std::vector<RetentionStats> retention_stats(const DatasetManifest& manifest,
                                            const std::set<std::string>& relevant_ids) {
  struct Tally {
    std::size_t patches = 0;
    std::size_t kept = 0;
    std::map<std::string, bool> image_ok;                  // image_id -> all patches relevant
    std::map<std::string, std::set<std::string>> images;  // patient -> images
  };
  std::map<Magnification, Tally> by_mag;
  for (const auto& r : manifest.records()) {
    auto& t = by_mag[r.magnification];
    const bool rel = relevant_ids.contains(r.sample_id);
    const auto& image = r.image_id.empty() ? r.sample_id : r.image_id;
    ++t.patches;
    t.kept += rel;
    auto [it, inserted] = t.image_ok.emplace(image, rel);
    if (!inserted) it->second = it->second && rel;
    t.images[r.patient_id].insert(image);
  }
  std::vector<RetentionStats> out;
  for (const auto& [mag, t] : by_mag) {
    RetentionStats s;
    s.magnification = mag;
    s.pct_patches_relevant = t.patches ? 100.0 * static_cast<double>(t.kept) / static_cast<double>(t.patches) : 0.0;
    std::size_t images_ok = 0;
    for (const auto& [image, ok] : t.image_ok) images_ok += ok;
    s.pct_images_with_all_patches_relevant =
        t.image_ok.empty() ? 0.0 : 100.0 * static_cast<double>(images_ok) / static_cast<double>(t.image_ok.size());
    std::size_t patients_ok = 0;
    for (const auto& [patient, images] : t.images)
      patients_ok += std::all_of(images.begin(), images.end(), [&](const std::string& im) { return t.image_ok.at(im); });
    s.pct_patients_with_all_images_relevant =
        t.images.empty() ? 0.0 : 100.0 * static_cast<double>(patients_ok) / static_cast<double>(t.images.size());
    out.push_back(s);
  }
  return out;
}

std::string retention_csv(std::span<const RetentionStats> stats, std::string_view filter_name) {
  std::string out = "magnification,filter,pct_patches,pct_images,pct_patients\n";
  for (const auto& s : stats) {
    csv::append_row(out, {std::string(to_string(s.magnification)), std::string(filter_name),
                          fmt::format("{:.6f}", s.pct_patches_relevant),
                          fmt::format("{:.6f}", s.pct_images_with_all_patches_relevant),
                          fmt::format("{:.6f}", s.pct_patients_with_all_images_relevant)});
  }
  return out;
}

void write_retention_csv(std::span<const RetentionStats> stats, std::string_view filter_name,
                         const std::filesystem::path& path) {
  io::write_file_atomic(path, retention_csv(stats, filter_name));
}

}  // namespace histofilter
