#pragma once

#include <functional>

#include "histofilter/data_model.hpp"
#include "histofilter/feature_io.hpp"

namespace histofilter {

enum class WholeImagePolicy {
  automatic,  // tumor_target images are patched, tissue_source images are used whole
  patch,
  whole,
};

struct PftasJobOptions {
  int patch_size = 150;
  WholeImagePolicy whole_images = WholeImagePolicy::automatic;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// PFTAS rows for every record. Patch records are cropped from their source
/// image at patch_origin; whole-image records are either described whole or
/// expanded into grid patches named by patch_name(). Each source image is
/// decoded once; row order follows the manifest.
FeatureMatrix compute_pftas_features(const DatasetManifest& manifest, const PftasJobOptions& options = {});

}  // namespace histofilter
