#include "histofilter/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "csv.hpp"
#include "histofilter/error.hpp"
#include "histofilter/random.hpp"
#include "io_util.hpp"

namespace histofilter {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<int> parse_int(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

constexpr std::array<std::string_view, 8> kManifestColumns = {
    "sample_id", "patient_id", "image_id", "magnification", "class_label", "source_path", "x", "y"};

}  // namespace

std::string_view to_string(Magnification m) noexcept {
  switch (m) {
    case Magnification::x40: return "40x";
    case Magnification::x100: return "100x";
    case Magnification::x200: return "200x";
    case Magnification::x400: return "400x";
    case Magnification::none: return "";
  }
  return "";
}

std::string_view to_string(BinaryLabel b) noexcept {
  switch (b) {
    case BinaryLabel::benign: return "benign";
    case BinaryLabel::malign: return "malign";
    case BinaryLabel::relevant: return "relevant";
    case BinaryLabel::irrelevant: return "irrelevant";
    case BinaryLabel::unset: return "unset";
  }
  return "unset";
}

std::string_view to_string(DatasetKind k) noexcept {
  return k == DatasetKind::tissue_source ? "tissue_source" : "tumor_target";
}

std::optional<Magnification> parse_magnification(std::string_view text) {
  auto t = lower(text);
  if (t.empty() || t == "none") return Magnification::none;
  if (t == "40x" || t == "40") return Magnification::x40;
  if (t == "100x" || t == "100") return Magnification::x100;
  if (t == "200x" || t == "200") return Magnification::x200;
  if (t == "400x" || t == "400") return Magnification::x400;
  return std::nullopt;
}

std::optional<BinaryLabel> tumor_binary_label(std::string_view class_label) {
  auto t = lower(class_label);
  std::replace(t.begin(), t.end(), ' ', '_');
  std::replace(t.begin(), t.end(), '-', '_');
  static const std::array<std::string_view, 10> benign = {
      "benign", "adenosis", "a", "fibroadenoma", "f", "phyllodes_tumor", "phyllodes", "pt", "tubular_adenoma", "ta"};
  static const std::array<std::string_view, 10> malign = {
      "malign", "malignant", "ductal_carcinoma", "dc", "lobular_carcinoma", "lc", "mucinous_carcinoma", "mc",
      "papillary_carcinoma", "pc"};
  if (std::find(benign.begin(), benign.end(), t) != benign.end()) return BinaryLabel::benign;
  if (std::find(malign.begin(), malign.end(), t) != malign.end()) return BinaryLabel::malign;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

DatasetManifest DatasetManifest::make(std::vector<SampleRecord> records, DatasetKind kind) {
  DatasetManifest m;
  m.kind_ = kind;
  m.index_.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.sample_id.empty()) throw Error(ErrorCode::MalformedRow, fmt::format("record {} has empty sample_id", i));
    if (!m.index_.emplace(r.sample_id, i).second) throw Error(ErrorCode::DuplicateSampleId, r.sample_id);
    if (kind == DatasetKind::tumor_target) {
      if (r.patient_id.empty())
        throw Error(ErrorCode::MalformedRow, fmt::format("tumor record '{}' has no patient_id", r.sample_id));
      if (r.magnification == Magnification::none)
        throw Error(ErrorCode::MalformedRow, fmt::format("tumor record '{}' has no magnification", r.sample_id));
    } else if (r.magnification != Magnification::none) {
      throw Error(ErrorCode::MalformedRow,
                  fmt::format("tissue record '{}' must not carry a magnification", r.sample_id));
    }
    ++m.inventory_[r.class_label];
  }
  m.records_ = std::move(records);
  return m;
}

std::optional<std::size_t> DatasetManifest::find(std::string_view sample_id) const {
  auto it = index_.find(std::string(sample_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> DatasetManifest::patients() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records_)
    if (seen.insert(r.patient_id).second) out.push_back(r.patient_id);
  return out;
}

DatasetManifest parse_manifest_text(std::string_view text, std::optional<DatasetKind> kind) {
  std::vector<csv::Row> rows;
  std::string err;
  if (!csv::parse(text, rows, err)) throw Error(ErrorCode::MalformedRow, err);
  if (rows.empty()) throw Error(ErrorCode::MissingColumn, "manifest has no header");

  const auto& header = rows.front().fields;
  std::array<std::size_t, kManifestColumns.size()> col{};
  for (std::size_t c = 0; c < kManifestColumns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), kManifestColumns[c]);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, std::string(kManifestColumns[c]));
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<SampleRecord> records;
  records.reserve(rows.size() - 1);
  bool any_magnified = false;
  bool any_unmagnified = false;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    auto bad = [&](const std::string& why) {
      return Error(ErrorCode::MalformedRow, fmt::format("line {}: {}", row.line, why));
    };
    if (row.fields.size() != header.size())
      throw bad(fmt::format("expected {} fields, found {}", header.size(), row.fields.size()));
    SampleRecord r;
    r.sample_id = row.fields[col[0]];
    r.patient_id = row.fields[col[1]];
    r.image_id = row.fields[col[2]];
    auto mag = parse_magnification(row.fields[col[3]]);
    if (!mag) throw bad("unknown magnification '" + row.fields[col[3]] + "'");
    r.magnification = *mag;
    r.class_label = row.fields[col[4]];
    r.source_path = row.fields[col[5]];
    const auto& xs = row.fields[col[6]];
    const auto& ys = row.fields[col[7]];
    if (xs.empty() != ys.empty()) throw bad("x and y must both be set or both be empty");
    if (!xs.empty()) {
      auto x = parse_int(xs);
      auto y = parse_int(ys);
      if (!x || !y || *x < 0 || *y < 0) throw bad("patch origin must be non-negative integers");
      r.patch_origin = PixelPoint{*x, *y};
    }
    if (r.sample_id.empty()) throw bad("empty sample_id");
    (r.magnification == Magnification::none ? any_unmagnified : any_magnified) = true;
    records.push_back(std::move(r));
  }

  DatasetKind resolved = kind.value_or(any_magnified ? DatasetKind::tumor_target : DatasetKind::tissue_source);
  if (!kind && any_magnified && any_unmagnified)
    throw Error(ErrorCode::MalformedRow, "manifest mixes records with and without magnification");

  for (auto& r : records) {
    if (resolved == DatasetKind::tumor_target) {
      auto label = tumor_binary_label(r.class_label);
      if (!label) throw Error(ErrorCode::MalformedRow, "unknown tumor class '" + r.class_label + "'");
      r.binary_label = *label;
    }
  }
  return DatasetManifest::make(std::move(records), resolved);
}

DatasetManifest parse_manifest(const std::filesystem::path& path, std::optional<DatasetKind> kind) {
  return parse_manifest_text(io::read_file(path), kind);
}

std::string manifest_to_csv(const DatasetManifest& manifest) {
  std::string out;
  csv::append_row(out, std::vector<std::string>(kManifestColumns.begin(), kManifestColumns.end()));
  for (const auto& r : manifest.records()) {
    csv::append_row(out, {r.sample_id, r.patient_id, r.image_id, std::string(to_string(r.magnification)),
                          r.class_label, r.source_path.generic_string(),
                          r.patch_origin ? std::to_string(r.patch_origin->x) : std::string(),
                          r.patch_origin ? std::to_string(r.patch_origin->y) : std::string()});
  }
  return out;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  io::write_file_atomic(path, manifest_to_csv(manifest));
}

// ---------------------------------------------------------------------------
// Folds

std::vector<FoldSpec> make_folds(const DatasetManifest& manifest, int n_folds, double train_fraction,
                                 std::uint64_t seed) {
  if (manifest.kind() != DatasetKind::tumor_target)
    throw Error(ErrorCode::WrongDatasetKind, "folds need a tumor_target manifest");
  if (n_folds < 1) throw Error(ErrorCode::InvalidArgument, "n_folds must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "train_fraction must be in (0,1)");

  // subtype -> sorted patients
  std::map<std::string, std::set<std::string>> by_subtype;
  std::map<std::string, std::string> subtype_of;
  for (const auto& r : manifest.records()) {
    auto [it, inserted] = subtype_of.emplace(r.patient_id, r.class_label);
    if (!inserted && it->second != r.class_label)
      throw Error(ErrorCode::InconsistentPatient,
                  fmt::format("patient '{}' has classes '{}' and '{}'", r.patient_id, it->second, r.class_label));
    by_subtype[r.class_label].insert(r.patient_id);
  }
  for (const auto& [subtype, patients] : by_subtype)
    if (patients.size() < 2)
      throw Error(ErrorCode::TooFewPatients, fmt::format("subtype '{}' has {} patient(s)", subtype, patients.size()));

  // Largest-remainder allocation of the overall train count across subtypes.
  std::size_t total = subtype_of.size();
  auto target_total = static_cast<long>(std::lround(train_fraction * static_cast<double>(total)));
  std::vector<std::string> subtypes;
  std::vector<long> n_train;
  std::vector<double> remainder;
  long allocated = 0;
  for (const auto& [subtype, patients] : by_subtype) {
    double exact = train_fraction * static_cast<double>(patients.size());
    subtypes.push_back(subtype);
    n_train.push_back(static_cast<long>(std::floor(exact)));
    remainder.push_back(exact - std::floor(exact));
    allocated += n_train.back();
  }
  std::vector<std::size_t> order(subtypes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; allocated < target_total && k < order.size(); ++k, ++allocated) ++n_train[order[k]];
  for (std::size_t s = 0; s < subtypes.size(); ++s) {
    auto count = static_cast<long>(by_subtype[subtypes[s]].size());
    n_train[s] = std::clamp(n_train[s], 1L, count - 1);
  }

  std::vector<FoldSpec> folds;
  folds.reserve(static_cast<std::size_t>(n_folds));
  for (int f = 0; f < n_folds; ++f) {
    FoldSpec fold;
    fold.fold_index = f;
    fold.seed = seed;
    for (std::size_t s = 0; s < subtypes.size(); ++s) {
      const auto& set = by_subtype[subtypes[s]];
      std::vector<std::string> patients(set.begin(), set.end());
      auto rng = make_rng(seed, {static_cast<std::uint64_t>(f), s});
      shuffle_in_place(patients, rng);
      for (std::size_t p = 0; p < patients.size(); ++p)
        (static_cast<long>(p) < n_train[s] ? fold.train_patients : fold.test_patients).insert(patients[p]);
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

void validate_fold(const FoldSpec& fold, const DatasetManifest& manifest) {
  for (const auto& p : fold.train_patients)
    if (fold.test_patients.count(p))
      throw Error(ErrorCode::FoldMismatch, fmt::format("fold {}: patient '{}' on both sides", fold.fold_index, p));
  std::set<std::string> seen;
  for (const auto& r : manifest.records()) {
    if (!seen.insert(r.patient_id).second) continue;
    if (!fold.train_patients.count(r.patient_id) && !fold.test_patients.count(r.patient_id))
      throw Error(ErrorCode::FoldMismatch,
                  fmt::format("fold {}: patient '{}' is in neither split", fold.fold_index, r.patient_id));
  }
  for (const auto* side : {&fold.train_patients, &fold.test_patients})
    for (const auto& p : *side)
      if (!seen.count(p))
        throw Error(ErrorCode::FoldMismatch, fmt::format("fold {}: unknown patient '{}'", fold.fold_index, p));
}

std::vector<FoldSpec> read_fold_file(const std::filesystem::path& path) {
  std::vector<csv::Row> rows;
  std::string err;
  if (!csv::parse(io::read_file(path), rows, err)) throw Error(ErrorCode::MalformedRow, err);
  if (rows.empty()) throw Error(ErrorCode::MissingColumn, "fold file has no header");
  const auto& header = rows.front().fields;
  std::array<std::size_t, 3> col{};
  constexpr std::array<std::string_view, 3> names = {"fold_index", "patient_id", "split"};
  for (std::size_t c = 0; c < names.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), names[c]);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, std::string(names[c]));
    col[c] = static_cast<std::size_t>(it - header.begin());
  }
  std::map<int, FoldSpec> folds;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.fields.size() != header.size())
      throw Error(ErrorCode::MalformedRow, fmt::format("line {}: wrong field count", row.line));
    auto idx = parse_int(row.fields[col[0]]);
    if (!idx || *idx < 0) throw Error(ErrorCode::MalformedRow, fmt::format("line {}: bad fold_index", row.line));
    auto& fold = folds[*idx];
    fold.fold_index = *idx;
    const auto& split = row.fields[col[2]];
    if (split == "train") {
      fold.train_patients.insert(row.fields[col[1]]);
    } else if (split == "test") {
      fold.test_patients.insert(row.fields[col[1]]);
    } else {
      throw Error(ErrorCode::MalformedRow, fmt::format("line {}: split must be train or test", row.line));
    }
  }
  std::vector<FoldSpec> out;
  for (auto& [idx, fold] : folds) out.push_back(std::move(fold));
  return out;
}

void write_fold_file(std::span<const FoldSpec> folds, const std::filesystem::path& path) {
  std::string out = "fold_index,patient_id,split\n";
  for (const auto& f : folds) {
    for (const auto& p : f.train_patients) csv::append_row(out, {std::to_string(f.fold_index), p, "train"});
    for (const auto& p : f.test_patients) csv::append_row(out, {std::to_string(f.fold_index), p, "test"});
  }
  io::write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Scenarios

std::string_view to_string(ScenarioId id) noexcept {
  static constexpr std::array<std::string_view, 7> names = {"F1", "F2", "F3", "F4", "F5", "F6", "F7"};
  return names[static_cast<int>(id) - 1];
}

std::optional<ScenarioId> parse_scenario_id(std::string_view text) {
  if (text.size() == 2 && (text[0] == 'F' || text[0] == 'f') && text[1] >= '1' && text[1] <= '7')
    return static_cast<ScenarioId>(text[1] - '0');
  return std::nullopt;
}

bool FilterScenario::is_relevant(std::string_view class_label) const {
  return std::find(relevant_classes.begin(), relevant_classes.end(), class_label) != relevant_classes.end();
}

int FilterScenario::relevant_total() const {
  int total = 0;
  for (const auto& c : relevant_classes) total += quotas.at(c);
  return total;
}

int FilterScenario::irrelevant_total() const {
  int total = 0;
  for (const auto& c : irrelevant_classes) total += quotas.at(c);
  return total;
}

FilterScenario make_scenario(ScenarioId id, int images_per_class) {
  if (images_per_class < 1 || images_per_class > kTissueImagesPerClass)
    throw Error(ErrorCode::InvalidArgument, "images_per_class must be in [1, 625]");

  // Reduced side of each published row: per-class count and row total, for 625
  // images per class. The other side always keeps every image.
  struct Row {
    int per_class;
    int total;
  };
  static constexpr std::array<Row, 7> table = {
      Row{89, 625}, Row{208, 1248}, Row{375, 1875}, Row{625, 2500}, Row{375, 1875}, Row{208, 1248}, Row{89, 625}};

  const int k = static_cast<int>(id);
  FilterScenario s;
  s.id = id;
  for (int c = 0; c < 8; ++c)
    (c < k ? s.relevant_classes : s.irrelevant_classes).emplace_back(kTissueClasses[static_cast<std::size_t>(c)]);

  const auto& row = table[static_cast<std::size_t>(k - 1)];
  const int n = images_per_class;
  const int per_class = row.per_class * n / kTissueImagesPerClass;
  const int total = (row.total * n + kTissueImagesPerClass / 2) / kTissueImagesPerClass;

  // The side with more classes is reduced; with 4/4 both sides are full.
  auto& reduced = k > 4 ? s.relevant_classes : s.irrelevant_classes;
  auto& full = k > 4 ? s.irrelevant_classes : s.relevant_classes;
  for (const auto& c : full) s.quotas[c] = n;
  for (const auto& c : reduced) s.quotas[c] = per_class;

  // Remainder to the first reduced classes in canonical order.
  int remainder = total - per_class * static_cast<int>(reduced.size());
  while (remainder > 0) {
    bool progressed = false;
    for (const auto& c : reduced) {
      if (remainder == 0) break;
      if (s.quotas[c] < n) {
        ++s.quotas[c];
        --remainder;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return s;
}

DatasetManifest relabel_source(const DatasetManifest& manifest, const FilterScenario& scenario,
                               std::uint64_t seed) {
  if (manifest.kind() != DatasetKind::tissue_source)
    throw Error(ErrorCode::WrongDatasetKind, "relabeling needs a tissue_source manifest");

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < manifest.records().size(); ++i) {
    const auto& label = manifest.records()[i].class_label;
    if (std::find(kTissueClasses.begin(), kTissueClasses.end(), label) == kTissueClasses.end())
      throw Error(ErrorCode::InvalidArgument, "unexpected tissue class '" + label + "'");
    by_class[label].push_back(i);
  }

  std::vector<bool> keep(manifest.size(), false);
  for (std::size_t c = 0; c < kTissueClasses.size(); ++c) {
    const std::string name(kTissueClasses[c]);
    auto it = by_class.find(name);
    if (it == by_class.end()) throw Error(ErrorCode::ClassMissing, name);
    auto quota = static_cast<std::size_t>(scenario.quotas.at(name));
    auto& idx = it->second;
    if (idx.size() < quota)
      throw Error(ErrorCode::ClassMissing,
                  fmt::format("class '{}' has {} records, quota is {}", name, idx.size(), quota));
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return manifest.records()[a].sample_id < manifest.records()[b].sample_id;
    });
    if (quota < idx.size()) {
      auto rng = make_rng(seed, {c});
      shuffle_in_place(idx, rng);
    }
    for (std::size_t q = 0; q < quota; ++q) keep[idx[q]] = true;
  }

  std::vector<SampleRecord> out;
  out.reserve(static_cast<std::size_t>(scenario.relevant_total() + scenario.irrelevant_total()));
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (!keep[i]) continue;
    auto r = manifest.records()[i];
    r.binary_label = scenario.is_relevant(r.class_label) ? BinaryLabel::relevant : BinaryLabel::irrelevant;
    out.push_back(std::move(r));
  }
  return DatasetManifest::make(std::move(out), DatasetKind::tissue_source);
}

}  // namespace histofilter
