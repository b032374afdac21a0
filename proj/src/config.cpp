#include "histofilter/config.hpp"

#include <toml.hpp>

#include <fmt/format.h>

#include "histofilter/error.hpp"
#include "histofilter/imaging.hpp"
#include "histofilter/model_io.hpp"
#include "io_util.hpp"

namespace histofilter {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::optional<std::filesystem::path> opt_path(const toml::table& t, std::string_view key,
                                              const std::filesystem::path& base) {
  if (auto v = t[key].value<std::string>()) return resolve(base, *v);
  return std::nullopt;
}

std::vector<double> number_list(const toml::node_view<const toml::node>& node, std::string_view what) {
  std::vector<double> out;
  const auto* arr = node.as_array();
  if (!arr) throw Error(ErrorCode::InvalidArgument, fmt::format("{} must be an array", what));
  for (const auto& el : *arr) {
    const auto v = el.value<double>();
    if (!v || !(*v > 0.0)) throw Error(ErrorCode::InvalidArgument, fmt::format("{} holds a non-positive entry", what));
    out.push_back(*v);
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, fmt::format("{} is empty", what));
  return out;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base,
                                         std::uint64_t default_seed) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("config line {}: {}", e.source().begin.line, e.description()));
  }
  ExperimentConfig cfg;
  const toml::table empty;
  const auto& data = root["data"].as_table() ? *root["data"].as_table() : empty;
  const auto& folds = root["folds"].as_table() ? *root["folds"].as_table() : empty;
  const auto& svm = root["svm"].as_table() ? *root["svm"].as_table() : empty;
  const auto& run = root["run"].as_table() ? *root["run"].as_table() : empty;

  const auto manifest = data["manifest"].value<std::string>();
  const auto features = data["features"].value<std::string>();
  if (!manifest || !features) throw Error(ErrorCode::InvalidArgument, "[data] needs manifest and features");
  cfg.manifest = resolve(base, *manifest);
  cfg.features = resolve(base, *features);
  const auto kind = data["feature_kind"].value_or<std::string>("pftas");
  if (kind != "pftas" && kind != "deep")
    throw Error(ErrorCode::InvalidArgument, fmt::format("feature_kind '{}' (expected pftas or deep)", kind));
  cfg.deep_features = kind == "deep";
  cfg.filter = opt_path(data, "filter", base);
  cfg.filter_features = opt_path(data, "filter_features", base);
  cfg.pca_model = opt_path(data, "pca_model", base);
  cfg.output = resolve(base, data["output"].value_or<std::string>("report"));

  auto& p = cfg.params;
  p.n_folds = folds["n"].value_or(5);
  p.train_fraction = folds["train_fraction"].value_or(0.7);
  p.fold_seed = static_cast<std::uint64_t>(folds["seed"].value_or(static_cast<std::int64_t>(default_seed)));
  cfg.fold_file = opt_path(folds, "file", base);
  if (p.n_folds < 1) throw Error(ErrorCode::InvalidArgument, "[folds] n must be positive");
  if (!(p.train_fraction > 0.0 && p.train_fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "[folds] train_fraction must lie in (0, 1)");

  if (svm["c_grid"]) p.grid.c_grid = number_list(svm["c_grid"], "c_grid");
  if (svm["gamma_grid"]) p.grid.gamma_grid = number_list(svm["gamma_grid"], "gamma_grid");
  p.grid.folds = svm["cv_folds"].value_or(5);
  p.grid.train.tol = svm["tol"].value_or(p.grid.train.tol);
  p.balanced = svm["balanced"].value_or(false);
  if (auto dim = svm["pca_dim"].value<std::int64_t>()) {
    if (*dim != 100 && *dim != 200 && *dim != 400 && *dim != 600)
      throw Error(ErrorCode::InvalidArgument, "pca_dim must be one of 100, 200, 400, 600");
    p.pca_dim = static_cast<int>(*dim);
  }
  if ((p.pca_dim || cfg.pca_model) && !cfg.deep_features)
    throw Error(ErrorCode::InvalidArgument, "PCA is only available for deep features");

  if (const auto* seeds = run["seeds"].as_array()) {
    p.seeds.clear();
    for (const auto& s : *seeds) {
      const auto v = s.value<std::int64_t>();
      if (!v || *v < 0) throw Error(ErrorCode::InvalidArgument, "[run] seeds must be non-negative integers");
      p.seeds.push_back(static_cast<std::uint64_t>(*v));
    }
    if (p.seeds.empty()) throw Error(ErrorCode::InvalidArgument, "[run] seeds is empty");
  } else {
    p.seeds = {default_seed};
  }
  if (const auto* mags = run["magnifications"].as_array()) {
    for (const auto& m : *mags) {
      const auto parsed = parse_magnification(m.value_or<std::string>(""));
      if (!parsed || *parsed == Magnification::none)
        throw Error(ErrorCode::InvalidArgument, "[run] magnifications must be 40x, 100x, 200x or 400x");
      p.magnifications.push_back(*parsed);
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, std::uint64_t default_seed) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoError, fmt::format("{}: not found", path.string()));
  auto cfg = parse_experiment_config(io::read_file(path), path.parent_path(), default_seed);
  if (cfg.fold_file) cfg.params.folds = read_fold_file(*cfg.fold_file);
  return cfg;
}

DatasetManifest load_patch_manifest(const std::filesystem::path& path, int patch_size) {
  auto manifest = parse_manifest(path, DatasetKind::tumor_target);
  const bool whole = std::any_of(manifest.records().begin(), manifest.records().end(),
                                 [](const SampleRecord& r) { return !r.is_patch(); });
  if (!whole) return manifest;
  return expand_to_patches(manifest, patch_size, [](const SampleRecord& r) {
    const auto img = decode_image(r.source_path);
    return std::pair{img.width(), img.height()};
  });
}

ExperimentData load_experiment_data(const ExperimentConfig& config, int patch_size) {
  ExperimentData data;
  data.manifest = load_patch_manifest(config.manifest, patch_size);
  data.features = read_features(config.features);
  if (config.filter) data.filter = read_filter_model(*config.filter);
  if (config.filter_features) data.filter_features = read_features(*config.filter_features);
  if (config.pca_model) data.pca = read_pca_model(*config.pca_model);
  return data;
}

}  // namespace histofilter
