#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "histofilter/data_model.hpp"
#include "histofilter/imaging.hpp"
#include "histofilter/random.hpp"

namespace histofilter {

/// Blob field: base color, disks of blob_color covering about blob_density of
/// the area with radii around blob_radius, then per-channel Gaussian noise.
struct TextureParams {
  std::string name;
  std::array<std::uint8_t, 3> base_color{200, 150, 190};
  std::array<std::uint8_t, 3> blob_color{120, 60, 140};
  double noise_sigma = 8.0;
  double blob_density = 0.3;
  double blob_radius = 5.0;
};

/// Near-uniform bright field used for irrelevant regions.
TextureParams background_texture();

/// Two structurally and chromatically distinct tumor textures named after
/// BreaKHis subtypes (one benign, one malign).
std::vector<TextureParams> default_tumor_textures();

/// Seven tissue textures plus the background texture, in canonical tissue
/// class order (Tumor ... Adipose, Empty).
std::vector<TextureParams> default_tissue_textures();

struct SynthSpec {
  int n_patients = 20;
  int images_per_patient = 4;
  int width = 700;
  int height = 460;
  /// Class names must be BreaKHis subtypes; patient p uses class p mod k.
  std::vector<TextureParams> texture_classes = default_tumor_textures();
  double irrelevant_fraction = 0.3;
  std::vector<Magnification> magnifications = {Magnification::x40};
  int patch_size = 150;
  std::uint64_t seed = 0;
};

struct SynthResult {
  DatasetManifest images;   // one record per image
  DatasetManifest patches;  // one record per grid patch
  std::filesystem::path images_manifest;
  std::filesystem::path patches_manifest;
  std::filesystem::path ground_truth;  // sample_id,image_id,background_fraction,ground_truth
};

/// Writes PNGs under out_dir/images plus the three CSVs. A patch is
/// irrelevant in the ground truth when background covers more than half of it.
SynthResult generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

struct SourceSynthSpec {
  int images_per_class = 60;
  int size = 150;
  /// Largest area share of a foreign intrusion (background into tissue and
  /// tissue into Empty), so the filter sees mixed tiles on both sides.
  double max_intrusion = 0.35;
  std::vector<TextureParams> tissue_textures = default_tissue_textures();
  std::uint64_t seed = 0;
};

/// CRC-style source corpus: tissue_source manifest over the 8 tissue classes.
SynthResult generate_source(const SourceSynthSpec& spec, const std::filesystem::path& out_dir);

/// Renders a texture (no background). Exposed for tests.
RgbImage render_texture(const TextureParams& t, int width, int height, Rng& rng);

}  // namespace histofilter
