#include "histofilter/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "histofilter/error.hpp"
#include "histofilter/parallel.hpp"
#include "histofilter/random.hpp"

namespace histofilter {

std::string_view to_string(AggregationRule rule) noexcept {
  return rule == AggregationRule::majority_vote ? "vote" : "sum";
}

BinaryLabel aggregate_image(std::span<const PatchPrediction> preds, AggregationRule rule) {
  if (preds.empty()) throw Error(ErrorCode::EmptyPredictionSet, "image has no patch predictions");
  if (rule == AggregationRule::majority_vote) {
    std::size_t malign = 0;
    for (const auto& p : preds) malign += p.predicted == BinaryLabel::malign;
    return 2 * malign >= preds.size() ? BinaryLabel::malign : BinaryLabel::benign;
  }
  double sum = 0.0;
  for (const auto& p : preds) sum += p.prob_malign;
  return sum / static_cast<double>(preds.size()) >= 0.5 ? BinaryLabel::malign : BinaryLabel::benign;
}

double patient_score(std::span<const ImageOutcome> images) {
  if (images.empty()) throw Error(ErrorCode::NoImages, "patient has no classified images");
  const auto correct = std::count_if(images.begin(), images.end(), [](const ImageOutcome& o) { return o.correct; });
  return static_cast<double>(correct) / static_cast<double>(images.size());
}

double overall_accuracy(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::NoPatients, "no patient scores");
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

TumorModel train_tumor_model(const RowMatrix& x, std::span<const int> y, const TumorTrainOptions& options) {
  GridSearchOptions grid = options.grid;
  grid.seed = options.seed;
  grid.train.positive_label = "malign";
  grid.train.negative_label = "benign";
  if (options.balanced) set_balanced_weights(grid.train, y);

  const auto search = grid_search(x, y, grid);
  TumorModel model;
  model.cv_accuracy = search.cv_accuracy;
  model.svm = svm_train(x, y, search.best_C, search.best_gamma, grid.train);
  const auto fold_of = stratified_folds(y, grid.folds, grid.seed);
  const auto oof = cross_val_decisions(x, y, fold_of, search.best_C, search.best_gamma, grid.train);
  model.svm.platt = platt_fit(std::span<const double>(oof.data(), static_cast<std::size_t>(oof.size())), y);
  return model;
}

std::vector<PatchPrediction> predict_patches(const TumorModel& model, const FeatureMatrix& features) {
  const Eigen::VectorXd dec =
      model.pca ? svm_decision(model.svm, pca_transform(*model.pca, features.rows())) : svm_decision(model.svm, features.rows());
  std::vector<PatchPrediction> out(features.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double f = dec(static_cast<Eigen::Index>(i));
    out[i] = PatchPrediction{features.sample_ids()[i], f, svm_probability(model.svm, f),
                             is_positive(f) ? BinaryLabel::malign : BinaryLabel::benign};
  }
  return out;
}

Evaluation evaluate_predictions(const DatasetManifest& manifest, std::span<const PatchPrediction> preds) {
  std::map<std::string, const PatchPrediction*> by_id;
  for (const auto& p : preds) by_id.emplace(p.sample_id, &p);

  struct ImageAcc {
    BinaryLabel truth = BinaryLabel::unset;
    std::vector<PatchPrediction> preds;
  };
  std::map<std::string, std::map<std::string, ImageAcc>> patients;  // patient -> image -> patches
  Evaluation ev;
  std::size_t patch_correct = 0;
  std::size_t matched = 0;
  for (const auto& r : manifest.records()) {
    if (r.binary_label != BinaryLabel::benign && r.binary_label != BinaryLabel::malign)
      throw Error(ErrorCode::InvalidArgument, fmt::format("record '{}' is not benign/malign", r.sample_id));
    auto& image = patients[r.patient_id][r.image_id.empty() ? r.sample_id : r.image_id];
    image.truth = r.binary_label;
    const auto it = by_id.find(r.sample_id);
    if (it == by_id.end()) continue;
    ++matched;
    image.preds.push_back(*it->second);
    patch_correct += it->second->predicted == r.binary_label;
  }
  if (matched != by_id.size()) throw Error(ErrorCode::JoinOrphans, "predictions for samples outside the manifest");
  ev.patches = matched;
  ev.patch_acc = matched ? static_cast<double>(patch_correct) / static_cast<double>(matched) : 0.0;

  std::vector<double> sum_scores, vote_scores;
  for (const auto& [patient, images] : patients) {
    std::vector<ImageOutcome> sum_out, vote_out;
    for (const auto& [image_id, acc] : images) {
      if (acc.preds.empty()) {
        ev.excluded_images.push_back(image_id);
        continue;
      }
      sum_out.push_back({image_id, aggregate_image(acc.preds, AggregationRule::sum_rule) == acc.truth});
      vote_out.push_back({image_id, aggregate_image(acc.preds, AggregationRule::majority_vote) == acc.truth});
    }
    if (sum_out.empty())
      throw Error(ErrorCode::PatientEliminated, fmt::format("every patch of test patient '{}' was filtered out", patient));
    sum_scores.push_back(patient_score(sum_out));
    vote_scores.push_back(patient_score(vote_out));
  }
  if (patients.empty()) throw Error(ErrorCode::NoPatients, "evaluation manifest is empty");
  ev.patient_sum = overall_accuracy(sum_scores);
  ev.patient_vote = overall_accuracy(vote_scores);

  // Plain image accuracy over classified images.
  std::size_t images = 0, sum_ok = 0, vote_ok = 0;
  for (const auto& [patient, imgs] : patients)
    for (const auto& [image_id, acc] : imgs) {
      if (acc.preds.empty()) continue;
      ++images;
      sum_ok += aggregate_image(acc.preds, AggregationRule::sum_rule) == acc.truth;
      vote_ok += aggregate_image(acc.preds, AggregationRule::majority_vote) == acc.truth;
    }
  ev.image_sum = static_cast<double>(sum_ok) / static_cast<double>(images);
  ev.image_vote = static_cast<double>(vote_ok) / static_cast<double>(images);
  return ev;
}

namespace {

MetricSummary summarize_metric(const std::vector<double>& v) {
  MetricSummary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

int label_sign(BinaryLabel b) {
  if (b == BinaryLabel::malign) return 1;
  if (b == BinaryLabel::benign) return -1;
  throw Error(ErrorCode::InvalidArgument, "tumor record without benign/malign label");
}

}  // namespace

std::vector<SummaryRow> summarize(std::span<const FoldResult> per_fold) {
  std::map<Magnification, std::array<std::vector<double>, 5>> cols;
  for (const auto& f : per_fold) {
    auto& c = cols[f.magnification];
    c[0].push_back(f.patch_acc);
    c[1].push_back(f.image_sum);
    c[2].push_back(f.image_vote);
    c[3].push_back(f.patient_sum);
    c[4].push_back(f.patient_vote);
  }
  std::vector<SummaryRow> out;
  for (const auto& [mag, c] : cols) {
    SummaryRow row;
    row.magnification = mag;
    row.runs = c[0].size();
    row.patch_acc = summarize_metric(c[0]);
    row.image_sum = summarize_metric(c[1]);
    row.image_vote = summarize_metric(c[2]);
    row.patient_sum = summarize_metric(c[3]);
    row.patient_vote = summarize_metric(c[4]);
    out.push_back(row);
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentData& data, const ExperimentParams& params) {
  const auto& manifest = data.manifest;
  if (manifest.kind() != DatasetKind::tumor_target)
    throw Error(ErrorCode::WrongDatasetKind, "experiment needs a tumor_target manifest");
  const auto& records = manifest.records();
  const auto rows = join_rows(manifest, data.features);

  ExperimentReport report;
  std::vector<bool> kept(records.size(), true);
  if (data.filter) {
    const auto& ff = data.filter_features ? *data.filter_features : data.features;
    const auto frows = join_rows(manifest, ff);
    const auto dec = filter_decisions(*data.filter, ff.select(frows));
    std::set<std::string> relevant;
    for (std::size_t i = 0; i < records.size(); ++i) {
      kept[i] = is_positive(dec(static_cast<Eigen::Index>(i)));
      if (kept[i]) relevant.insert(records[i].sample_id);
    }
    report.filter_name = fmt::format("{}/{}", to_string(data.filter->scenario), to_string(data.filter->feature_kind));
    report.retention = retention_stats(manifest, relevant);
  }

  std::vector<FoldSpec> folds = params.folds;
  if (folds.empty()) folds = make_folds(manifest, params.n_folds, params.train_fraction, params.fold_seed);
  for (const auto& f : folds) validate_fold(f, manifest);

  std::vector<Magnification> mags = params.magnifications;
  if (mags.empty()) {
    std::set<Magnification> present;
    for (const auto& r : records) present.insert(r.magnification);
    mags.assign(present.begin(), present.end());
  }

  struct Job {
    Magnification mag;
    std::uint64_t seed;
    std::size_t fold;
  };
  std::vector<Job> jobs;
  for (auto m : mags)
    for (auto s : params.seeds)
      for (std::size_t f = 0; f < folds.size(); ++f) jobs.push_back({m, s, f});

  report.per_fold.resize(jobs.size());
  parallel_for_index(jobs.size(), [&](std::size_t j) {
    const auto& job = jobs[j];
    const auto& fold = folds[job.fold];
    std::vector<std::size_t> train_rows, test_rows;
    std::vector<SampleRecord> test_records;
    std::vector<int> y;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (r.magnification != job.mag) continue;
      if (fold.test_patients.contains(r.patient_id)) {
        test_records.push_back(r);
        if (kept[i]) test_rows.push_back(rows[i]);
      } else if (kept[i]) {
        train_rows.push_back(rows[i]);
        y.push_back(label_sign(r.binary_label));
      }
    }
    // Leakage audit: no training row may belong to a test patient.
    for (auto row : train_rows) {
      const auto idx = manifest.find(data.features.sample_ids()[row]);
      if (idx && fold.test_patients.contains(records[*idx].patient_id))
        throw Error(ErrorCode::FoldMismatch, fmt::format("test sample '{}' reached training", records[*idx].sample_id));
    }

    // Fail before training when the filter left a test patient with nothing.
    std::set<std::string> with_rows;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (kept[i] && records[i].magnification == job.mag) with_rows.insert(records[i].patient_id);
    for (const auto& r : test_records)
      if (!with_rows.contains(r.patient_id))
        throw Error(ErrorCode::PatientEliminated,
                    fmt::format("every patch of test patient '{}' was filtered out (filter {}, magnification {}, fold {})",
                                r.patient_id, report.filter_name.value_or("none"), to_string(job.mag),
                                fold.fold_index));

    const auto train = data.features.select(train_rows);
    const auto test = data.features.select(test_rows);
    std::optional<PcaModel> pca = data.pca;
    if (!pca && params.pca_dim) pca = pca_fit(train.rows(), *params.pca_dim);

    TumorTrainOptions topt;
    topt.grid = params.grid;
    topt.balanced = params.balanced;
    topt.seed = make_rng(job.seed, {static_cast<std::uint64_t>(fold.fold_index)})();
    TumorModel model = train_tumor_model(pca ? pca_transform(*pca, train.rows()) : train.rows(), y, topt);
    model.pca = pca;
    const auto preds = predict_patches(model, test);

    Evaluation ev;
    try {
      ev = evaluate_predictions(DatasetManifest::make(std::move(test_records), DatasetKind::tumor_target), preds);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PatientEliminated) throw;
      throw Error(ErrorCode::PatientEliminated,
                  fmt::format("{} (filter {}, magnification {}, fold {})", e.what(), report.filter_name.value_or("none"),
                              to_string(job.mag), fold.fold_index));
    }
    auto& out = report.per_fold[j];
    out.magnification = job.mag;
    out.seed = job.seed;
    out.fold_index = fold.fold_index;
    out.patch_acc = ev.patch_acc;
    out.image_sum = ev.image_sum;
    out.image_vote = ev.image_vote;
    out.patient_sum = ev.patient_sum;
    out.patient_vote = ev.patient_vote;
    out.train_patches = train_rows.size();
    out.test_patches = test_rows.size();
    out.best_C = model.svm.C;
    out.best_gamma = model.svm.gamma;
    out.excluded_images = std::move(ev.excluded_images);
  });
  report.summary = summarize(report.per_fold);
  return report;
}

std::vector<WinLoss> win_loss(const ExperimentReport& filtered, const ExperimentReport& unfiltered) {
  using Key = std::tuple<int, Magnification, std::uint64_t>;
  auto index = [](const ExperimentReport& r) {
    std::map<Key, const FoldResult*> m;
    for (const auto& f : r.per_fold)
      if (!m.emplace(Key{f.fold_index, f.magnification, f.seed}, &f).second)
        throw Error(ErrorCode::FoldMismatch, "duplicate (fold, magnification, seed) entry");
    return m;
  };
  const auto a = index(filtered);
  const auto b = index(unfiltered);
  if (a.size() != b.size()) throw Error(ErrorCode::FoldMismatch, "reports cover different configurations");
  std::map<int, WinLoss> tally;
  for (const auto& [key, fa] : a) {
    const auto it = b.find(key);
    if (it == b.end())
      throw Error(ErrorCode::FoldMismatch, fmt::format("fold {} / {} / seed {} missing from the unfiltered report",
                                                       std::get<0>(key), to_string(std::get<1>(key)), std::get<2>(key)));
    auto& t = tally[std::get<0>(key)];
    t.fold_index = std::get<0>(key);
    for (auto [x, y] : {std::pair{fa->patient_sum, it->second->patient_sum},
                        std::pair{fa->patient_vote, it->second->patient_vote}}) {
      if (x > y) ++t.wins;
      else if (x < y) ++t.losses;
      else ++t.ties;
    }
  }
  std::vector<WinLoss> out;
  for (const auto& [fold, t] : tally) out.push_back(t);
  return out;
}

}  // namespace histofilter
