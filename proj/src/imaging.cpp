#include "histofilter/imaging.hpp"

#include <algorithm>
#include <array>
#include <cstring>

#include <fmt/format.h>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "histofilter/error.hpp"
#include "io_util.hpp"

namespace histofilter {

RgbImage::RgbImage(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "image dimensions must be >= 1");
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3, 0);
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> rgb) : width_(width), height_(height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "image dimensions must be >= 1");
  if (rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3)
    throw Error(ErrorCode::InvalidArgument, "pixel buffer size does not match dimensions");
  pixels_ = std::move(rgb);
}

std::vector<std::uint8_t> RgbImage::channel(int c) const {
  std::vector<std::uint8_t> plane(pixels_.size() / 3);
  for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = pixels_[i * 3 + static_cast<std::size_t>(c)];
  return plane;
}

// ---------------------------------------------------------------------------

std::vector<int> axis_positions(int dim, int patch_size) {
  if (patch_size < 1) throw Error(ErrorCode::InvalidArgument, "patch_size must be >= 1");
  if (patch_size > dim)
    throw Error(ErrorCode::PatchTooLarge, fmt::format("patch {} exceeds dimension {}", patch_size, dim));
  // round(dim / patch) for positive integers, half away from zero
  const long n = std::max(1L, (2L * dim + patch_size) / (2L * patch_size));
  if (n == 1) return {0};
  const long span = dim - patch_size;
  const long den = n - 1;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) out.push_back(static_cast<int>((2 * i * span + den) / (2 * den)));
  return out;
}

PatchGrid compute_grid(int width, int height, int patch_size) {
  PatchGrid grid;
  grid.patch_size = patch_size;
  grid.x_positions = axis_positions(width, patch_size);
  grid.y_positions = axis_positions(height, patch_size);
  return grid;
}

RgbImage crop(const RgbImage& image, PixelPoint origin, int size) {
  if (origin.x < 0 || origin.y < 0 || origin.x + size > image.width() || origin.y + size > image.height())
    throw Error(ErrorCode::GridMismatch, fmt::format("window ({},{})+{} outside {}x{} image", origin.x, origin.y, size,
                                                     image.width(), image.height()));
  RgbImage out(size, size);
  const auto src = image.bytes();
  auto dst = out.bytes();
  const auto row_bytes = static_cast<std::size_t>(size) * 3;
  for (int y = 0; y < size; ++y) {
    auto src_off = (static_cast<std::size_t>(origin.y + y) * static_cast<std::size_t>(image.width()) +
                    static_cast<std::size_t>(origin.x)) * 3;
    std::memcpy(&dst[static_cast<std::size_t>(y) * row_bytes], &src[src_off], row_bytes);
  }
  return out;
}

std::vector<Patch> extract_patches(const RgbImage& image, const PatchGrid& grid) {
  std::vector<Patch> patches;
  patches.reserve(grid.count());
  for (int y : grid.y_positions)
    for (int x : grid.x_positions) patches.push_back(Patch{{x, y}, crop(image, {x, y}, grid.patch_size)});
  return patches;
}

// ---------------------------------------------------------------------------

namespace {

enum class Container { png, tiff, jpeg, unknown };

Container sniff(std::span<const std::uint8_t> b) {
  static constexpr std::array<std::uint8_t, 8> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (b.size() >= 8 && std::equal(png.begin(), png.end(), b.begin())) return Container::png;
  if (b.size() >= 4 && ((b[0] == 'I' && b[1] == 'I' && b[2] == 42 && b[3] == 0) ||
                        (b[0] == 'M' && b[1] == 'M' && b[2] == 0 && b[3] == 42)))
    return Container::tiff;
  if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return Container::jpeg;
  return Container::unknown;
}

std::uint8_t to8(std::uint16_t v) { return static_cast<std::uint8_t>((v * 255u + 32767u) / 65535u); }

}  // namespace

RgbImage decode_image_bytes(std::span<const std::uint8_t> bytes, const std::string& name) {
  if (bytes.size() < 8) throw Error(ErrorCode::CorruptFile, name + ": file too short");
  if (sniff(bytes) == Container::unknown) throw Error(ErrorCode::UnsupportedFormat, name);

  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8U, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat m;
  try {
    m = cv::imdecode(buf, cv::IMREAD_UNCHANGED);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::CorruptFile, name + ": " + e.what());
  }
  if (m.empty()) throw Error(ErrorCode::CorruptFile, name);

  const int depth = m.depth();
  if (depth != CV_8U && depth != CV_16U)
    throw Error(ErrorCode::UnsupportedFormat, name + ": sample depth is neither 8 nor 16 bit");
  const int ch = m.channels();
  if (ch != 1 && ch != 3 && ch != 4) throw Error(ErrorCode::UnsupportedFormat, name + ": channel count");

  RgbImage out(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      std::array<std::uint8_t, 3> rgb{};
      if (depth == CV_8U) {
        const auto* p = m.ptr<std::uint8_t>(y) + static_cast<std::ptrdiff_t>(x) * ch;
        if (ch == 1) rgb = {p[0], p[0], p[0]};
        else rgb = {p[2], p[1], p[0]};  // OpenCV order is BGR(A)
      } else {
        const auto* p = m.ptr<std::uint16_t>(y) + static_cast<std::ptrdiff_t>(x) * ch;
        if (ch == 1) rgb = {to8(p[0]), to8(p[0]), to8(p[0])};
        else rgb = {to8(p[2]), to8(p[1]), to8(p[0])};
      }
      out.set(x, y, rgb[0], rgb[1], rgb[2]);
    }
  }
  return out;
}

RgbImage decode_image(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::CorruptFile, "cannot read " + path.string());
  }
  return decode_image_bytes(
      std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()),
      path.string());
}

void write_png(const RgbImage& image, const std::filesystem::path& path, int compression) {
  cv::Mat bgr(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = bgr.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width(); ++x) {
      row[x * 3 + 0] = image.at(x, y, 2);
      row[x * 3 + 1] = image.at(x, y, 1);
      row[x * 3 + 2] = image.at(x, y, 0);
    }
  }
  std::vector<std::uint8_t> encoded;
  if (!cv::imencode(".png", bgr, encoded, {cv::IMWRITE_PNG_COMPRESSION, compression}))
    throw Error(ErrorCode::IoError, "PNG encoding failed for " + path.string());
  io::write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(encoded.data()), encoded.size()));
}

std::string patch_name(std::string_view image_id, PixelPoint origin) {
  return fmt::format("{}_y{}_x{}", image_id, origin.y, origin.x);
}

DatasetManifest expand_to_patches(const DatasetManifest& manifest, int patch_size, const DimensionsFn& dims) {
  std::vector<SampleRecord> out;
  out.reserve(manifest.size() * 15);
  for (const auto& r : manifest.records()) {
    if (r.is_patch()) {
      out.push_back(r);
      continue;
    }
    auto [w, h] = dims(r);
    auto grid = compute_grid(w, h, patch_size);
    const auto& image_id = r.image_id.empty() ? r.sample_id : r.image_id;
    for (int y : grid.y_positions) {
      for (int x : grid.x_positions) {
        SampleRecord p = r;
        p.image_id = image_id;
        p.patch_origin = PixelPoint{x, y};
        p.sample_id = patch_name(image_id, *p.patch_origin);
        out.push_back(std::move(p));
      }
    }
  }
  return DatasetManifest::make(std::move(out), manifest.kind());
}

}  // namespace histofilter
