#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "histofilter/imaging.hpp"

namespace histofilter {

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1, row-major

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

  bool get(int x, int y) const noexcept { return bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] != 0; }
  BinaryMask complement() const;
};

using TasHistogram = std::array<double, 9>;

inline constexpr std::size_t kPftasBins = 9;
inline constexpr std::size_t kPftasDim = 162;  // 9 bins x 3 masks x 3 channels x (mask, complement)
using PftasVector = std::array<double, kPftasDim>;

/// Otsu's threshold: the t maximizing between-class variance of {<= t} vs
/// {> t}. Candidates start at the lowest occupied bin and ties go to the
/// smallest t, so a single-valued histogram yields that value. Comparisons
/// are exact (256-bit integer arithmetic).
/// Throws EmptyHistogram when every bin is zero and InvalidArgument when the
/// total mass reaches 2^40.
int otsu_threshold(std::span<const std::uint64_t, 256> histogram);

/// Fraction of foreground pixels having 0..8 foreground 8-neighbours
/// (outside the mask counts as background). All zeros for an empty mask.
TasHistogram tas_histogram(const BinaryMask& mask);

/// Parameter-free TAS: per channel, Otsu threshold T, mean/std (population)
/// of values above T, three masks (mu-sigma, mu+sigma], > mu-sigma, > mu,
/// each with its complement. Layout: channel, mask, {mask, complement}, bin.
PftasVector pftas(const RgbImage& image);

}  // namespace histofilter
