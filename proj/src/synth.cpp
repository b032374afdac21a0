#include "histofilter/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <fmt/format.h>

#include "csv.hpp"
#include "histofilter/error.hpp"
#include "histofilter/parallel.hpp"
#include "io_util.hpp"

namespace histofilter {

namespace {

using Uniform = boost::random::uniform_real_distribution<double>;

struct Disk {
  double cx, cy, r;
  bool contains(int x, int y) const {
    const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
    return dx * dx + dy * dy <= r * r;
  }
};

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

/// Paints disks into `mask` until at least `fraction` of the area is set.
std::vector<Disk> cover(std::vector<std::uint8_t>& mask, int w, int h, double fraction, double r_lo, double r_hi,
                        Rng& rng) {
  std::vector<Disk> disks;
  if (fraction <= 0.0) return disks;
  const auto target = static_cast<std::size_t>(std::ceil(fraction * w * h));
  std::size_t covered = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  Uniform ux(0.0, w), uy(0.0, h), ur(r_lo, r_hi);
  for (int guard = 0; covered < target && guard < 10000; ++guard) {
    Disk d{ux(rng), uy(rng), ur(rng)};
    // Shrink the last disk so coverage does not overshoot too far.
    const int x0 = std::max(0, static_cast<int>(d.cx - d.r)), x1 = std::min(w - 1, static_cast<int>(d.cx + d.r));
    const int y0 = std::max(0, static_cast<int>(d.cy - d.r)), y1 = std::min(h - 1, static_cast<int>(d.cy + d.r));
    for (int y = y0; y <= y1 && covered < target; ++y)
      for (int x = x0; x <= x1; ++x) {
        auto& m = mask[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
        if (!m && d.contains(x, y)) {
          m = 1;
          ++covered;
        }
      }
    disks.push_back(d);
  }
  return disks;
}

/// Pixels of `over` replace `base` wherever mask is set.
void composite(RgbImage& base, const RgbImage& over, const std::vector<std::uint8_t>& mask) {
  for (int y = 0; y < base.height(); ++y)
    for (int x = 0; x < base.width(); ++x)
      if (mask[static_cast<std::size_t>(y) * static_cast<std::size_t>(base.width()) + static_cast<std::size_t>(x)])
        base.set(x, y, over.at(x, y, 0), over.at(x, y, 1), over.at(x, y, 2));
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, fmt::format("{}: {}", dir.string(), ec.message()));
}

}  // namespace

TextureParams background_texture() { return {"background", {236, 232, 240}, {236, 232, 240}, 2.5, 0.0, 1.0}; }

std::vector<TextureParams> default_tumor_textures() {
  return {
      {"fibroadenoma", {214, 170, 200}, {150, 80, 150}, 6.0, 0.25, 3.0},
      {"ductal_carcinoma", {170, 110, 170}, {70, 30, 100}, 6.0, 0.50, 9.0},
  };
}

std::vector<TextureParams> default_tissue_textures() {
  return {
      {"Tumor", {175, 115, 170}, {80, 35, 110}, 7.0, 0.45, 7.0},
      {"Stroma", {220, 160, 195}, {185, 110, 160}, 6.0, 0.30, 2.5},
      {"ComplexStroma", {205, 145, 185}, {120, 60, 130}, 7.0, 0.35, 4.0},
      {"Lympho", {190, 140, 200}, {60, 25, 100}, 6.0, 0.55, 3.0},
      {"Debris", {210, 165, 190}, {140, 80, 120}, 9.0, 0.25, 6.0},
      {"Mucosa", {215, 175, 205}, {150, 90, 160}, 6.0, 0.40, 10.0},
      {"Adipose", {225, 200, 220}, {170, 120, 160}, 5.0, 0.15, 5.0},
      [] {
        auto t = background_texture();
        t.name = "Empty";
        return t;
      }(),
  };
}

RgbImage render_texture(const TextureParams& t, int width, int height, Rng& rng) {
  std::vector<std::uint8_t> blob(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
  if (t.blob_density > 0.0) cover(blob, width, height, t.blob_density, 0.7 * t.blob_radius, 1.3 * t.blob_radius, rng);
  RgbImage img(width, height);
  boost::random::normal_distribution<double> noise(0.0, std::max(t.noise_sigma, 1e-12));
  const bool noisy = t.noise_sigma > 0.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const auto& c = blob[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]
                          ? t.blob_color
                          : t.base_color;
      std::array<std::uint8_t, 3> px{};
      for (int k = 0; k < 3; ++k) px[static_cast<std::size_t>(k)] = clamp_byte(c[static_cast<std::size_t>(k)] + (noisy ? noise(rng) : 0.0));
      img.set(x, y, px[0], px[1], px[2]);
    }
  return img;
}

SynthResult generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.texture_classes.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two texture classes");
  if (!(spec.irrelevant_fraction >= 0.0 && spec.irrelevant_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "irrelevant_fraction outside [0, 1]");
  if (spec.n_patients < 1 || spec.images_per_patient < 1) throw Error(ErrorCode::InvalidArgument, "empty corpus");
  for (const auto& t : spec.texture_classes)
    if (!tumor_binary_label(t.name)) throw Error(ErrorCode::InvalidArgument, fmt::format("'{}' is not a tumor class", t.name));
  const auto grid = compute_grid(spec.width, spec.height, spec.patch_size);
  const auto image_dir = out_dir / "images";
  ensure_dir(image_dir);

  struct Item {
    int patient, image;
    Magnification mag;
  };
  std::vector<Item> items;
  for (int p = 0; p < spec.n_patients; ++p)
    for (auto mag : spec.magnifications)
      for (int i = 0; i < spec.images_per_patient; ++i) items.push_back({p, i, mag});

  std::vector<SampleRecord> image_records(items.size());
  std::vector<std::vector<SampleRecord>> patch_records(items.size());
  std::vector<std::string> truth_rows(items.size());
  const auto bg = background_texture();
  parallel_for_index(items.size(), [&](std::size_t k) {
    const auto& it = items[k];
    const auto& tex = spec.texture_classes[static_cast<std::size_t>(it.patient) % spec.texture_classes.size()];
    auto rng = make_rng(spec.seed, {static_cast<std::uint64_t>(k)});
    auto img = render_texture(tex, spec.width, spec.height, rng);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(spec.height), 0);
    const double r_lo = 0.15 * std::min(spec.width, spec.height);
    cover(mask, spec.width, spec.height, spec.irrelevant_fraction, r_lo, 2.0 * r_lo, rng);
    composite(img, render_texture(bg, spec.width, spec.height, rng), mask);

    const auto patient = fmt::format("P{:03d}", it.patient);
    const auto image_id = fmt::format("{}_{}_{:02d}", patient, to_string(it.mag), it.image);
    const auto path = image_dir / (image_id + ".png");
    write_png(img, path);

    SampleRecord rec;
    rec.sample_id = image_id;
    rec.patient_id = patient;
    rec.image_id = image_id;
    rec.magnification = it.mag;
    rec.class_label = tex.name;
    rec.binary_label = *tumor_binary_label(tex.name);
    rec.source_path = path;
    image_records[k] = rec;

    std::string truth;
    for (int y : grid.y_positions)
      for (int x : grid.x_positions) {
        std::size_t bg_px = 0;
        for (int yy = y; yy < y + spec.patch_size; ++yy)
          for (int xx = x; xx < x + spec.patch_size; ++xx)
            bg_px += mask[static_cast<std::size_t>(yy) * static_cast<std::size_t>(spec.width) + static_cast<std::size_t>(xx)];
        const double frac = static_cast<double>(bg_px) / (static_cast<double>(spec.patch_size) * spec.patch_size);
        SampleRecord p = rec;
        p.sample_id = patch_name(image_id, {x, y});
        p.patch_origin = PixelPoint{x, y};
        csv::append_row(truth, {p.sample_id, image_id, fmt::format("{:.6f}", frac), frac > 0.5 ? "irrelevant" : "relevant"});
        patch_records[k].push_back(std::move(p));
      }
    truth_rows[k] = std::move(truth);
  });

  std::vector<SampleRecord> all_patches;
  std::string truth_csv = "sample_id,image_id,background_fraction,ground_truth\n";
  for (std::size_t k = 0; k < items.size(); ++k) {
    for (auto& p : patch_records[k]) all_patches.push_back(std::move(p));
    truth_csv += truth_rows[k];
  }
  SynthResult out;
  out.images = DatasetManifest::make(std::move(image_records), DatasetKind::tumor_target);
  out.patches = DatasetManifest::make(std::move(all_patches), DatasetKind::tumor_target);
  out.images_manifest = out_dir / "manifest.csv";
  out.patches_manifest = out_dir / "patches.csv";
  out.ground_truth = out_dir / "ground_truth.csv";
  write_manifest(out.images, out.images_manifest);
  write_manifest(out.patches, out.patches_manifest);
  io::write_file_atomic(out.ground_truth, truth_csv);
  return out;
}

SynthResult generate_source(const SourceSynthSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.tissue_textures.size() != kTissueClasses.size())
    throw Error(ErrorCode::InvalidArgument, "source generator needs one texture per tissue class");
  if (spec.images_per_class < 1) throw Error(ErrorCode::InvalidArgument, "images_per_class must be positive");
  const auto image_dir = out_dir / "images";
  ensure_dir(image_dir);
  const std::size_t n_classes = kTissueClasses.size();
  const std::size_t total = n_classes * static_cast<std::size_t>(spec.images_per_class);
  const std::size_t empty_class = n_classes - 1;
  std::vector<SampleRecord> records(total);
  std::string truth_csv = "sample_id,image_id,background_fraction,ground_truth\n";
  std::vector<std::string> truth_rows(total);
  parallel_for_index(total, [&](std::size_t k) {
    const std::size_t c = k / static_cast<std::size_t>(spec.images_per_class);
    const std::size_t i = k % static_cast<std::size_t>(spec.images_per_class);
    auto rng = make_rng(spec.seed, {c, i});
    const int s = spec.size;
    auto img = render_texture(spec.tissue_textures[c], s, s, rng);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(s) * static_cast<std::size_t>(s), 0);
    Uniform share(0.0, spec.max_intrusion);
    cover(mask, s, s, share(rng), 0.2 * s, 0.45 * s, rng);
    // Empty tiles receive a tissue intrusion; tissue tiles a background one.
    const std::size_t other = c == empty_class ? static_cast<std::size_t>(Uniform(0.0, 7.0)(rng)) % empty_class : empty_class;
    composite(img, render_texture(spec.tissue_textures[other], s, s, rng), mask);
    const double frac_mask = static_cast<double>(std::count(mask.begin(), mask.end(), 1)) / (static_cast<double>(s) * s);
    const double bg_frac = c == empty_class ? 1.0 - frac_mask : frac_mask;

    const auto id = fmt::format("{}_{:04d}", kTissueClasses[c], i);
    const auto path = image_dir / (id + ".png");
    write_png(img, path);
    SampleRecord rec;
    rec.sample_id = id;
    rec.image_id = id;
    rec.class_label = std::string(kTissueClasses[c]);
    rec.source_path = path;
    records[k] = std::move(rec);
    std::string row;
    csv::append_row(row, {id, id, fmt::format("{:.6f}", bg_frac), bg_frac > 0.5 ? "irrelevant" : "relevant"});
    truth_rows[k] = std::move(row);
  });
  for (auto& r : truth_rows) truth_csv += r;
  SynthResult out;
  out.images = DatasetManifest::make(std::move(records), DatasetKind::tissue_source);
  out.patches = out.images;
  out.images_manifest = out_dir / "manifest.csv";
  out.patches_manifest = out.images_manifest;
  out.ground_truth = out_dir / "ground_truth.csv";
  write_manifest(out.images, out.images_manifest);
  io::write_file_atomic(out.ground_truth, truth_csv);
  return out;
}

}  // namespace histofilter
