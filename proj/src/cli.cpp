#include "histofilter/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <fmt/format.h>
#include <tbb/global_control.h>

#include "csv.hpp"
#include "histofilter/config.hpp"
#include "histofilter/error.hpp"
#include "histofilter/experiment.hpp"
#include "histofilter/feature_io.hpp"
#include "histofilter/filterbank.hpp"
#include "histofilter/imaging.hpp"
#include "histofilter/model_io.hpp"
#include "histofilter/pca.hpp"
#include "histofilter/pftas_features.hpp"
#include "histofilter/report_io.hpp"
#include "histofilter/synth.hpp"
#include "io_util.hpp"

namespace histofilter {

namespace {

namespace fs = std::filesystem;

std::uint64_t env_seed() {
  const char* v = std::getenv("HISTOFILTER_SEED");
  if (!v || !*v) return 0;
  char* end = nullptr;
  const auto s = std::strtoull(v, &end, 10);
  if (*end) throw Error(ErrorCode::UsageError, fmt::format("HISTOFILTER_SEED='{}' is not an integer", v));
  return s;
}

bool is_csv(const fs::path& p) { return p.extension() == ".csv"; }

FeatureMatrix load_features(const fs::path& p) { return is_csv(p) ? read_features_csv(p) : read_features(p); }

void save_features(const FeatureMatrix& m, const fs::path& p) {
  if (is_csv(p)) write_features_csv(m, p);
  else write_features(m, p);
}

struct GridFlags {
  std::vector<double> c_grid;
  std::vector<double> gamma_grid;
  int cv_folds = 5;
  double tol = 1e-3;

  void add(CLI::App* app) {
    app->add_option("--c-grid", c_grid, "C values (comma separated)")->delimiter(',');
    app->add_option("--gamma-grid", gamma_grid, "gamma values (comma separated)")->delimiter(',');
    app->add_option("--cv-folds", cv_folds, "cross-validation folds")->check(CLI::Range(2, 100));
    app->add_option("--tol", tol, "SMO stopping tolerance")->check(CLI::PositiveNumber);
  }
  GridSearchOptions options() const {
    GridSearchOptions g;
    if (!c_grid.empty()) g.c_grid = c_grid;
    if (!gamma_grid.empty()) g.gamma_grid = gamma_grid;
    g.folds = cv_folds;
    g.train.tol = tol;
    return g;
  }
};

/// Keeps only the manifest records the filter calls relevant.
std::vector<std::size_t> relevant_records(const DatasetManifest& manifest, const std::optional<fs::path>& filter,
                                          const std::optional<fs::path>& filter_features, const FeatureMatrix& features,
                                          std::ostream& err) {
  std::vector<std::size_t> keep;
  if (!filter) {
    for (std::size_t i = 0; i < manifest.size(); ++i) keep.push_back(i);
    return keep;
  }
  const auto model = read_filter_model(*filter);
  const auto ff = filter_features ? load_features(*filter_features) : features;
  const auto dec = filter_decisions(model, ff.select(join_rows(manifest, ff)));
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (is_positive(dec(static_cast<Eigen::Index>(i)))) keep.push_back(i);
  err << fmt::format("filter kept {} of {} patches\n", keep.size(), manifest.size());
  return keep;
}

DatasetManifest subset(const DatasetManifest& m, const std::vector<std::size_t>& idx) {
  std::vector<SampleRecord> recs;
  for (auto i : idx) recs.push_back(m.records()[i]);
  return DatasetManifest::make(std::move(recs), m.kind());
}

int run(int argc, const char* const* argv, std::ostream& err) {
  CLI::App app{"Histopathology patch filtering and tumor classification", "histofilter"};
  app.require_subcommand(1);
  int jobs = 0;
  std::optional<std::uint64_t> seed_flag;
  app.add_option("--jobs", jobs, "worker threads (default: all CPUs)")->check(CLI::NonNegativeNumber);

  auto seed_of = [&] { return seed_flag ? *seed_flag : env_seed(); };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed_flag, "seed (default: $HISTOFILTER_SEED or 0)"); };

  // patch
  fs::path patch_manifest, patch_out, patch_png;
  int patch_size = 150;
  auto* patch = app.add_subcommand("patch", "expand an image manifest into grid patches");
  patch->add_option("--manifest", patch_manifest)->required();
  patch->add_option("--out-manifest", patch_out)->required();
  patch->add_option("--png-dir", patch_png, "also write each patch as <image_id>_y<y>_x<x>.png");
  patch->add_option("--patch-size", patch_size)->check(CLI::PositiveNumber);

  // pftas
  fs::path pftas_manifest, pftas_out;
  std::string pftas_mode = "auto";
  auto* pf = app.add_subcommand("pftas", "compute 162-dim PFTAS features");
  pf->add_option("--manifest", pftas_manifest)->required();
  pf->add_option("--out", pftas_out, "FV01 file (or .csv)")->required();
  pf->add_option("--patch-size", patch_size)->check(CLI::PositiveNumber);
  pf->add_option("--images", pftas_mode, "whole-image records: auto, patch or whole")
      ->check(CLI::IsMember({"auto", "patch", "whole"}));

  // features-import
  fs::path imp_in, imp_out;
  auto* imp = app.add_subcommand("features-import", "convert between feature CSV and FV01");
  imp->add_option("--in", imp_in)->required()->check(CLI::ExistingFile);
  imp->add_option("--out", imp_out)->required();

  // pca
  fs::path pca_features, pca_out, pca_model_in, pca_transformed;
  int pca_k = 0;
  auto* pca = app.add_subcommand("pca", "fit or apply a PCA projection");
  pca->add_option("--features", pca_features)->required();
  pca->add_option("--k", pca_k, "output dimension when fitting")->check(CLI::PositiveNumber);
  pca->add_option("--out", pca_out, "model file to write when fitting");
  pca->add_option("--model", pca_model_in, "existing model to apply");
  pca->add_option("--transformed", pca_transformed, "projected features to write");

  // filter-train
  fs::path ft_manifest, ft_features, ft_out;
  std::string ft_scenario = "F7", ft_kind = "pftas";
  double ft_val = 0.15;
  GridFlags ft_grid;
  auto* ft = app.add_subcommand("filter-train", "train a relevance filter on a tissue-labeled source");
  ft->add_option("--manifest", ft_manifest)->required();
  ft->add_option("--features", ft_features)->required();
  ft->add_option("--scenario", ft_scenario, "F1..F7");
  ft->add_option("--kind", ft_kind, "pftas or deep_pca_{100,200,400,600}");
  ft->add_option("--val-fraction", ft_val);
  ft->add_option("--out", ft_out)->required();
  ft_grid.add(ft);
  add_seed(ft);

  // filter-apply
  fs::path fa_filter, fa_features, fa_out, fa_manifest, fa_retention;
  auto* fa = app.add_subcommand("filter-apply", "split patches into relevant and irrelevant");
  fa->add_option("--filter", fa_filter)->required();
  fa->add_option("--features", fa_features)->required();
  fa->add_option("--out", fa_out, "CSV sample_id,decision,relevant")->required();
  fa->add_option("--manifest", fa_manifest, "patch manifest for retention statistics");
  fa->add_option("--retention-out", fa_retention)->needs(fa->get_option("--manifest"));

  // train / evaluate
  fs::path tr_manifest, tr_features, tr_out, tr_filter_path, tr_filter_features;
  int tr_pca = 0;
  bool tr_balanced = false;
  GridFlags tr_grid;
  auto* tr = app.add_subcommand("train", "train the benign/malign classifier");
  tr->add_option("--manifest", tr_manifest)->required();
  tr->add_option("--features", tr_features)->required();
  tr->add_option("--filter", tr_filter_path);
  tr->add_option("--filter-features", tr_filter_features);
  tr->add_option("--pca-dim", tr_pca)->check(CLI::IsMember({100, 200, 400, 600}));
  tr->add_flag("--balanced", tr_balanced, "inverse-frequency class weights");
  tr->add_option("--out", tr_out)->required();
  tr_grid.add(tr);
  add_seed(tr);

  fs::path ev_model, ev_manifest, ev_features, ev_filter_path, ev_filter_features, ev_pred, ev_metrics;
  auto* ev = app.add_subcommand("evaluate", "score a trained classifier");
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--manifest", ev_manifest)->required();
  ev->add_option("--features", ev_features)->required();
  ev->add_option("--filter", ev_filter_path);
  ev->add_option("--filter-features", ev_filter_features);
  ev->add_option("--predictions", ev_pred, "per-patch CSV");
  ev->add_option("--metrics", ev_metrics, "JSON accuracies")->required();

  // synth
  fs::path sy_out;
  std::string sy_kind = "target";
  SynthSpec sy;
  SourceSynthSpec sy_src;
  auto* syn = app.add_subcommand("synth", "generate a synthetic corpus");
  syn->add_option("--out", sy_out)->required();
  syn->add_option("--kind", sy_kind, "target (tumor images) or source (tissue tiles)")
      ->check(CLI::IsMember({"target", "source"}));
  syn->add_option("--patients", sy.n_patients)->check(CLI::PositiveNumber);
  syn->add_option("--images", sy.images_per_patient, "images per patient")->check(CLI::PositiveNumber);
  syn->add_option("--width", sy.width)->check(CLI::PositiveNumber);
  syn->add_option("--height", sy.height)->check(CLI::PositiveNumber);
  syn->add_option("--irrelevant-fraction", sy.irrelevant_fraction)->check(CLI::Range(0.0, 1.0));
  syn->add_option("--images-per-class", sy_src.images_per_class, "source tiles per tissue class")
      ->check(CLI::PositiveNumber);
  add_seed(syn);

  // report
  fs::path rp_config, rp_out;
  std::vector<fs::path> rp_compare;
  auto* rp = app.add_subcommand("report", "run an experiment config or compare two runs");
  auto* cfg_opt = rp->add_option("--config", rp_config, "experiment TOML");
  auto* cmp_opt = rp->add_option("--compare", rp_compare, "filtered and unfiltered per_fold.csv")->expected(2);
  cfg_opt->excludes(cmp_opt);
  rp->add_option("--out", rp_out, "output directory (config) or CSV (compare)");
  add_seed(rp);

  try {
    app.parse(argc, argv);
    if (rp->parsed() && !cfg_opt->count() && !cmp_opt->count())
      throw CLI::RequiredError("report needs --config or --compare");
    if (pca->parsed() && pca_model_in.empty() && (pca_k == 0 || pca_out.empty()))
      throw CLI::RequiredError("pca needs --model, or --k with --out");
  } catch (const CLI::CallForHelp&) {
    err << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    err << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  std::optional<tbb::global_control> limit;
  if (jobs > 0) limit.emplace(tbb::global_control::max_allowed_parallelism, static_cast<std::size_t>(jobs));

  if (patch->parsed()) {
    const auto images = parse_manifest(patch_manifest);
    auto out = expand_to_patches(images, patch_size, [](const SampleRecord& r) {
      const auto img = decode_image(r.source_path);
      return std::pair{img.width(), img.height()};
    });
    write_manifest(out, patch_out);
    if (!patch_png.empty()) {
      for (const auto& r : images.records()) {
        const auto img = decode_image(r.source_path);
        const auto& id = r.image_id.empty() ? r.sample_id : r.image_id;
        for (const auto& p : extract_patches(img, compute_grid(img.width(), img.height(), patch_size)))
          write_png(p.image, patch_png / (patch_name(id, p.origin) + ".png"));
      }
    }
    err << fmt::format("{} images -> {} patches\n", images.size(), out.size());
  } else if (pf->parsed()) {
    PftasJobOptions o;
    o.patch_size = patch_size;
    o.whole_images = pftas_mode == "patch"   ? WholeImagePolicy::patch
                     : pftas_mode == "whole" ? WholeImagePolicy::whole
                                             : WholeImagePolicy::automatic;
    std::size_t step = 0;
    o.progress = [&](std::size_t done, std::size_t total) {
      const auto pct = total ? done * 10 / total : 10;
      if (pct > step || done == total) {
        step = pct;
        err << fmt::format("pftas: {}/{} images\n", done, total);
      }
    };
    const auto features = compute_pftas_features(parse_manifest(pftas_manifest), o);
    save_features(features, pftas_out);
    err << fmt::format("wrote {} rows of dim {}\n", features.size(), features.dim());
  } else if (imp->parsed()) {
    const auto m = load_features(imp_in);
    save_features(m, imp_out);
    err << fmt::format("wrote {} rows of dim {}\n", m.size(), m.dim());
  } else if (pca->parsed()) {
    const auto features = load_features(pca_features);
    PcaModel model;
    if (!pca_model_in.empty()) {
      model = read_pca_model(pca_model_in);
    } else {
      model = pca_fit(features, pca_k);
      write_model(model, pca_out);
      const auto ratio = explained_variance_ratio(model);
      err << fmt::format("k={} keeps {:.2f}% of the variance\n", pca_k, 100.0 * ratio.sum());
    }
    if (!pca_transformed.empty()) save_features(pca_transform(model, features), pca_transformed);
  } else if (ft->parsed()) {
    const auto scenario = parse_scenario_id(ft_scenario);
    const auto kind = parse_feature_kind(ft_kind);
    if (!scenario) throw Error(ErrorCode::UsageError, fmt::format("unknown scenario '{}'", ft_scenario));
    if (!kind) throw Error(ErrorCode::UsageError, fmt::format("unknown feature kind '{}'", ft_kind));
    const auto source = parse_manifest(ft_manifest, DatasetKind::tissue_source);
    int per_class = kTissueImagesPerClass;
    for (auto c : kTissueClasses) {
      const auto it = source.class_inventory().find(std::string(c));
      if (it != source.class_inventory().end()) per_class = std::min<int>(per_class, static_cast<int>(it->second));
    }
    const auto relabeled = relabel_source(source, make_scenario(*scenario, per_class), seed_of());
    FilterTrainOptions o;
    o.scenario = *scenario;
    o.val_fraction = ft_val;
    o.seed = seed_of();
    o.grid = ft_grid.options();
    const auto model = train_filter(load_features(ft_features), relabeled, *kind, o);
    write_model(model, ft_out);
    err << fmt::format("filter {}/{}: validation accuracy {:.4f}, C={}, gamma={}\n", ft_scenario, ft_kind,
                       model.validation_accuracy, model.svm.C, model.svm.gamma);
  } else if (fa->parsed()) {
    const auto model = read_filter_model(fa_filter);
    const auto features = load_features(fa_features);
    const auto dec = filter_decisions(model, features);
    std::string out = "sample_id,decision,relevant\n";
    std::set<std::string> relevant;
    for (std::size_t i = 0; i < features.size(); ++i) {
      const double d = dec(static_cast<Eigen::Index>(i));
      if (is_positive(d)) relevant.insert(features.sample_ids()[i]);
      csv::append_row(out, {features.sample_ids()[i], fmt::format("{}", d), is_positive(d) ? "1" : "0"});
    }
    io::write_file_atomic(fa_out, out);
    if (!fa_retention.empty()) {
      const auto stats = retention_stats(parse_manifest(fa_manifest), relevant);
      write_retention_csv(stats, fmt::format("{}/{}", to_string(model.scenario), to_string(model.feature_kind)),
                          fa_retention);
    }
    err << fmt::format("{} of {} patches relevant\n", relevant.size(), features.size());
  } else if (tr->parsed()) {
    const auto manifest = load_patch_manifest(tr_manifest, patch_size);
    const auto features = load_features(tr_features);
    const auto rows = join_rows(manifest, features);
    const auto keep = relevant_records(manifest, tr_filter_path.empty() ? std::nullopt : std::optional(tr_filter_path),
                                       tr_filter_features.empty() ? std::nullopt : std::optional(tr_filter_features),
                                       features, err);
    std::vector<std::size_t> sel;
    std::vector<int> y;
    for (auto i : keep) {
      sel.push_back(rows[i]);
      const auto b = manifest.records()[i].binary_label;
      if (b != BinaryLabel::benign && b != BinaryLabel::malign)
        throw Error(ErrorCode::InvalidArgument, fmt::format("record '{}' is not benign/malign", manifest.records()[i].sample_id));
      y.push_back(b == BinaryLabel::malign ? 1 : -1);
    }
    RowMatrix x = features.select(sel).rows();
    std::optional<PcaModel> p;
    if (tr_pca) {
      p = pca_fit(x, tr_pca);
      x = pca_transform(*p, x);
    }
    TumorTrainOptions o;
    o.grid = tr_grid.options();
    o.balanced = tr_balanced;
    o.seed = seed_of();
    auto model = train_tumor_model(x, y, o);
    model.pca = p;
    write_model(model, tr_out);
    err << fmt::format("trained on {} patches: cv accuracy {:.4f}, C={}, gamma={}\n", y.size(), model.cv_accuracy,
                       model.svm.C, model.svm.gamma);
  } else if (ev->parsed()) {
    const auto model = read_tumor_model(ev_model);
    const auto manifest = load_patch_manifest(ev_manifest, patch_size);
    const auto features = load_features(ev_features);
    const auto rows = join_rows(manifest, features);
    const auto keep = relevant_records(manifest, ev_filter_path.empty() ? std::nullopt : std::optional(ev_filter_path),
                                       ev_filter_features.empty() ? std::nullopt : std::optional(ev_filter_features),
                                       features, err);
    std::vector<std::size_t> sel;
    for (auto i : keep) sel.push_back(rows[i]);
    const auto preds = predict_patches(model, features.select(sel));
    const auto result = evaluate_predictions(manifest, preds);
    if (!ev_pred.empty()) {
      std::string out = "sample_id,decision,prob_malign,predicted\n";
      for (const auto& p : preds)
        csv::append_row(out, {p.sample_id, fmt::format("{}", p.decision_value), fmt::format("{}", p.prob_malign),
                              std::string(to_string(p.predicted))});
      io::write_file_atomic(ev_pred, out);
    }
    nlohmann::json j{{"patches", result.patch_acc},     {"images_sum", result.image_sum},
                     {"images_vote", result.image_vote}, {"patients_sum", result.patient_sum},
                     {"patients_vote", result.patient_vote}, {"excluded_images", result.excluded_images}};
    io::write_file_atomic(ev_metrics, j.dump(1) + "\n");
    err << fmt::format("patch accuracy {:.4f}, patient accuracy sum {:.4f} / vote {:.4f}\n", result.patch_acc,
                       result.patient_sum, result.patient_vote);
  } else if (syn->parsed()) {
    if (sy_kind == "source") {
      sy_src.seed = seed_of();
      const auto r = generate_source(sy_src, sy_out);
      err << fmt::format("wrote {} source tiles to {}\n", r.images.size(), sy_out.string());
    } else {
      sy.seed = seed_of();
      const auto r = generate(sy, sy_out);
      err << fmt::format("wrote {} images ({} patches) to {}\n", r.images.size(), r.patches.size(), sy_out.string());
    }
  } else if (rp->parsed()) {
    if (cfg_opt->count()) {
      const auto cfg = load_experiment_config(rp_config, seed_of());
      const auto report = run_experiment(load_experiment_data(cfg), cfg.params);
      const auto out = rp_out.empty() ? cfg.output : rp_out;
      write_report(report, out);
      err << fmt::format("wrote {} fold results to {}\n", report.per_fold.size(), out.string());
    } else {
      const auto wl = win_loss(read_per_fold_csv(rp_compare[0]), read_per_fold_csv(rp_compare[1]));
      const auto text = win_loss_csv(wl);
      if (rp_out.empty()) err << text;
      else io::write_file_atomic(rp_out, text);
    }
  }
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& err) {
  try {
    return run(argc, argv, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::UsageError ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& err) {
  std::vector<const char*> argv{"histofilter"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), err);
}

}  // namespace histofilter
