#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace histofilter {

enum class Magnification { x40, x100, x200, x400, none };
enum class BinaryLabel { benign, malign, relevant, irrelevant, unset };
enum class DatasetKind { tissue_source, tumor_target };

std::string_view to_string(Magnification m) noexcept;
std::string_view to_string(BinaryLabel b) noexcept;
std::string_view to_string(DatasetKind k) noexcept;
/// Accepts "40x"/"100X"/"200x"/"400x", and "" or "none".
std::optional<Magnification> parse_magnification(std::string_view text);

/// benign/malign for BreaKHis subtypes (full names, short codes such as "DC",
/// or the literal words "benign"/"malign"). Case-insensitive.
std::optional<BinaryLabel> tumor_binary_label(std::string_view class_label);

struct PixelPoint {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

struct SampleRecord {
  std::string sample_id;
  std::string patient_id;
  std::string image_id;
  Magnification magnification = Magnification::none;
  std::string class_label;
  BinaryLabel binary_label = BinaryLabel::unset;
  std::filesystem::path source_path;
  std::optional<PixelPoint> patch_origin;

  bool is_patch() const noexcept { return patch_origin.has_value(); }
};

/// Immutable collection of records with a recomputed class inventory.
class DatasetManifest {
 public:
  DatasetManifest() = default;

  /// Validates invariants (unique ids, patient ids on tumor records,
  /// magnification/kind consistency) and derives the class inventory.
  static DatasetManifest make(std::vector<SampleRecord> records, DatasetKind kind);

  const std::vector<SampleRecord>& records() const noexcept { return records_; }
  DatasetKind kind() const noexcept { return kind_; }
  const std::map<std::string, std::size_t>& class_inventory() const noexcept { return inventory_; }
  std::size_t size() const noexcept { return records_.size(); }

  /// Index of the record with this sample id, if any.
  std::optional<std::size_t> find(std::string_view sample_id) const;

  /// Patient ids in first-appearance order.
  std::vector<std::string> patients() const;

 private:
  std::vector<SampleRecord> records_;
  DatasetKind kind_ = DatasetKind::tissue_source;
  std::map<std::string, std::size_t> inventory_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reads the manifest CSV. When `kind` is not given it is inferred: all
/// magnifications empty means tissue_source, otherwise tumor_target.
DatasetManifest parse_manifest(const std::filesystem::path& path,
                               std::optional<DatasetKind> kind = std::nullopt);
DatasetManifest parse_manifest_text(std::string_view text, std::optional<DatasetKind> kind = std::nullopt);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
std::string manifest_to_csv(const DatasetManifest& manifest);

// ---------------------------------------------------------------------------
// Patient-wise folds

struct FoldSpec {
  int fold_index = 0;
  std::set<std::string> train_patients;
  std::set<std::string> test_patients;
  std::uint64_t seed = 0;
};

/// Stratified (by tumor subtype) patient-wise train/test draws, one per fold.
std::vector<FoldSpec> make_folds(const DatasetManifest& manifest, int n_folds, double train_fraction,
                                 std::uint64_t seed);

/// Throws FoldMismatch when the fold does not partition the manifest's patients.
void validate_fold(const FoldSpec& fold, const DatasetManifest& manifest);

std::vector<FoldSpec> read_fold_file(const std::filesystem::path& path);
void write_fold_file(std::span<const FoldSpec> folds, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Source relabeling

inline constexpr std::array<std::string_view, 8> kTissueClasses = {
    "Tumor", "Stroma", "ComplexStroma", "Lympho", "Debris", "Mucosa", "Adipose", "Empty"};
inline constexpr int kTissueImagesPerClass = 625;

enum class ScenarioId { F1 = 1, F2, F3, F4, F5, F6, F7 };

std::string_view to_string(ScenarioId id) noexcept;
std::optional<ScenarioId> parse_scenario_id(std::string_view text);

struct FilterScenario {
  ScenarioId id = ScenarioId::F7;
  /// The first k canonical classes for scenario Fk.
  std::vector<std::string> relevant_classes;
  std::vector<std::string> irrelevant_classes;
  std::map<std::string, int> quotas;

  bool is_relevant(std::string_view class_label) const;
  int relevant_total() const;
  int irrelevant_total() const;
};

/// Scenario quotas. With the default 625 images per class these are exactly
/// the published re-labeling table (including the 89+remainder rows); other
/// per-class sizes scale that table proportionally.
FilterScenario make_scenario(ScenarioId id, int images_per_class = kTissueImagesPerClass);

/// Assigns relevant/irrelevant and subsamples each class to its quota. The
/// draw shuffles each class's records sorted by sample id, so it does not
/// depend on manifest row order. Output keeps input row order.
DatasetManifest relabel_source(const DatasetManifest& manifest, const FilterScenario& scenario,
                               std::uint64_t seed);

}  // namespace histofilter
