#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "histofilter/data_model.hpp"

namespace histofilter {

/// 8-bit RGB raster, row-major, channels interleaved.
class RgbImage {
 public:
  RgbImage() = default;
  /// Zero-filled image. Throws InvalidArgument unless width, height >= 1.
  RgbImage(int width, int height);
  /// Takes ownership of interleaved RGB bytes (size must be 3*width*height).
  RgbImage(int width, int height, std::vector<std::uint8_t> rgb);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t at(int x, int y, int channel) const noexcept {
    return pixels_[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3 +
                   static_cast<std::size_t>(channel)];
  }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
    auto* p = &pixels_[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  std::span<const std::uint8_t> bytes() const noexcept { return pixels_; }
  std::span<std::uint8_t> bytes() noexcept { return pixels_; }

  /// One channel as a dense width*height plane.
  std::vector<std::uint8_t> channel(int c) const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

struct PatchGrid {
  int patch_size = 0;
  std::vector<int> x_positions;
  std::vector<int> y_positions;

  std::size_t count() const noexcept { return x_positions.size() * y_positions.size(); }
};

/// Window offsets along one axis: n = max(1, round(dim / patch)) windows,
/// first at 0, last flush with the far edge, the rest evenly spaced and
/// rounded half away from zero.
std::vector<int> axis_positions(int dim, int patch_size);

/// Throws PatchTooLarge when patch_size exceeds either dimension.
PatchGrid compute_grid(int width, int height, int patch_size);

struct Patch {
  PixelPoint origin;
  RgbImage image;
};

RgbImage crop(const RgbImage& image, PixelPoint origin, int size);

/// Row-major (y outer, x inner) crops. Throws GridMismatch when a window
/// falls outside the image.
std::vector<Patch> extract_patches(const RgbImage& image, const PatchGrid& grid);

/// PNG, TIFF (8- or 16-bit; 16-bit is linearly rescaled) and JPEG. Grayscale
/// is replicated to three channels, alpha dropped.
RgbImage decode_image(const std::filesystem::path& path);
RgbImage decode_image_bytes(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");

void write_png(const RgbImage& image, const std::filesystem::path& path, int compression = 3);

/// `<image_id>_y<y>_x<x>`: used both as the patch sample id and PNG stem.
std::string patch_name(std::string_view image_id, PixelPoint origin);

/// Image size provider for patch expansion; decode_image-backed by default.
using DimensionsFn = std::function<std::pair<int, int>(const SampleRecord&)>;

/// Replaces every whole-image record by its grid patches (records that are
/// already patches pass through). Lineage fields are copied.
DatasetManifest expand_to_patches(const DatasetManifest& manifest, int patch_size, const DimensionsFn& dims);

}  // namespace histofilter
