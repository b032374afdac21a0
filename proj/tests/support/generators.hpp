#pragma once

// Seeded generators for property tests.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "histofilter/feature_io.hpp"
#include "histofilter/imaging.hpp"
#include "histofilter/pftas.hpp"
#include "histofilter/random.hpp"

namespace gen {

using histofilter::Rng;

inline int uniform_int(Rng& rng, int lo, int hi) { return boost::random::uniform_int_distribution<int>(lo, hi)(rng); }
inline double uniform(Rng& rng, double lo, double hi) {
  return boost::random::uniform_real_distribution<double>(lo, hi)(rng);
}
inline double normal(Rng& rng, double sd = 1.0) { return boost::random::normal_distribution<double>(0.0, sd)(rng); }

inline histofilter::RgbImage image(Rng& rng, int w, int h) {
  histofilter::RgbImage img(w, h);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(uniform_int(rng, 0, 255));
  return img;
}

/// Smooth-ish random image: a few random levels plus noise, so Otsu splits
/// are not trivial.
inline histofilter::RgbImage blotchy_image(Rng& rng, int w, int h) {
  histofilter::RgbImage img(w, h);
  const int cells = uniform_int(rng, 2, 6);
  std::vector<std::array<int, 3>> levels(static_cast<std::size_t>(cells * cells));
  for (auto& l : levels)
    for (auto& c : l) c = uniform_int(rng, 20, 235);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto& l = levels[static_cast<std::size_t>((y * cells / h) * cells + x * cells / w)];
      std::array<std::uint8_t, 3> px{};
      for (int c = 0; c < 3; ++c)
        px[static_cast<std::size_t>(c)] =
            static_cast<std::uint8_t>(std::clamp(l[static_cast<std::size_t>(c)] + uniform_int(rng, -20, 20), 0, 255));
      img.set(x, y, px[0], px[1], px[2]);
    }
  return img;
}

inline histofilter::BinaryMask mask(Rng& rng, int w, int h, double density) {
  histofilter::BinaryMask m(w, h);
  for (auto& b : m.bits) b = uniform(rng, 0, 1) < density ? 1 : 0;
  return m;
}

/// Mixes sparse, dense, clustered and single-spike histograms.
inline std::array<std::uint64_t, 256> histogram(Rng& rng) {
  std::array<std::uint64_t, 256> h{};
  switch (uniform_int(rng, 0, 3)) {
    case 0:
      for (auto& v : h) v = static_cast<std::uint64_t>(uniform_int(rng, 0, 1000));
      break;
    case 1:
      for (int k = uniform_int(rng, 1, 6); k > 0; --k) h[static_cast<std::size_t>(uniform_int(rng, 0, 255))] += static_cast<std::uint64_t>(uniform_int(rng, 1, 50));
      break;
    case 2: {
      const int a = uniform_int(rng, 0, 255), b = uniform_int(rng, 0, 255);
      for (int k = 0; k < 2000; ++k) {
        const int centre = k % 2 ? a : b;
        h[static_cast<std::size_t>(std::clamp(centre + static_cast<int>(normal(rng, 12)), 0, 255))] += 1;
      }
      break;
    }
    default:
      h[static_cast<std::size_t>(uniform_int(rng, 0, 255))] = static_cast<std::uint64_t>(uniform_int(rng, 1, 1 << 20));
  }
  if (std::all_of(h.begin(), h.end(), [](auto v) { return v == 0; })) h[0] = 1;
  return h;
}

inline histofilter::RowMatrix matrix(Rng& rng, int n, int d, double sd = 1.0) {
  histofilter::RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng, sd);
  return m;
}

inline std::vector<std::string> ids(std::size_t n, const std::string& prefix = "s") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("histofilter_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace gen
