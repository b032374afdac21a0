#include "histofilter/pftas.hpp"

#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>

#include "histofilter/error.hpp"

namespace histofilter {

using boost::multiprecision::uint256_t;

BinaryMask BinaryMask::complement() const {
  BinaryMask out = *this;
  for (auto& b : out.bits) b = b ? 0 : 1;
  return out;
}

int otsu_threshold(std::span<const std::uint64_t, 256> histogram) {
  std::uint64_t n = 0;
  std::uint64_t s = 0;
  int lowest = -1;
  for (int v = 0; v < 256; ++v) {
    const auto c = histogram[static_cast<std::size_t>(v)];
    if (c && lowest < 0) lowest = v;
    n += c;
    s += c * static_cast<std::uint64_t>(v);
  }
  if (n == 0) throw Error(ErrorCode::EmptyHistogram, "histogram has no mass");
  if (n >= (std::uint64_t{1} << 40)) throw Error(ErrorCode::InvalidArgument, "histogram mass too large");

  // N^2 * between-class variance = (S0*N - S*N0)^2 / (N0*N1)
  int best_t = lowest;
  uint256_t best_num = 0;
  uint256_t best_den = 1;
  std::uint64_t n0 = 0;
  std::uint64_t s0 = 0;
  for (int t = 0; t < 256; ++t) {
    const auto c = histogram[static_cast<std::size_t>(t)];
    n0 += c;
    s0 += c * static_cast<std::uint64_t>(t);
    if (t < lowest) continue;
    const std::uint64_t n1 = n - n0;
    if (n0 == 0 || n1 == 0) continue;  // score 0 never beats the incumbent
    const uint256_t a = uint256_t(s0) * n;
    const uint256_t b = uint256_t(s) * n0;
    const uint256_t diff = a > b ? a - b : b - a;
    const uint256_t num = diff * diff;
    const uint256_t den = uint256_t(n0) * n1;
    if (num * best_den > best_num * den) {
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }
  return best_t;
}

TasHistogram tas_histogram(const BinaryMask& mask) {
  TasHistogram hist{};
  const int w = mask.width;
  const int h = mask.height;
  if (w <= 0 || h <= 0) return hist;

  // Vertical 3-sums over a zero-padded copy, then horizontal 3-sums.
  const int pw = w + 2;
  std::vector<std::uint8_t> vsum(static_cast<std::size_t>(pw) * static_cast<std::size_t>(h), 0);
  auto bit = [&](int x, int y) -> std::uint8_t {
    return (y < 0 || y >= h) ? 0 : mask.bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x)];
  };
  for (int y = 0; y < h; ++y) {
    auto* row = &vsum[static_cast<std::size_t>(y) * static_cast<std::size_t>(pw)];
    for (int x = 0; x < w; ++x) row[x + 1] = static_cast<std::uint8_t>(bit(x, y - 1) + bit(x, y) + bit(x, y + 1));
  }

  std::array<std::uint64_t, 9> counts{};
  std::uint64_t total = 0;
  for (int y = 0; y < h; ++y) {
    const auto* row = &vsum[static_cast<std::size_t>(y) * static_cast<std::size_t>(pw)];
    const auto* m = &mask.bits[static_cast<std::size_t>(y) * static_cast<std::size_t>(w)];
    for (int x = 0; x < w; ++x) {
      if (!m[x]) continue;
      const int neighbours = row[x] + row[x + 1] + row[x + 2] - 1;
      ++counts[static_cast<std::size_t>(neighbours)];
      ++total;
    }
  }
  if (total == 0) return hist;
  for (std::size_t i = 0; i < 9; ++i) hist[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  return hist;
}

PftasVector pftas(const RgbImage& image) {
  if (image.empty()) throw Error(ErrorCode::EmptyHistogram, "zero-area image");
  PftasVector out{};
  std::size_t pos = 0;
  const int w = image.width();
  const int h = image.height();

  for (int c = 0; c < 3; ++c) {
    const auto plane = image.channel(c);
    std::array<std::uint64_t, 256> hist{};
    for (auto v : plane) ++hist[v];
    const int t = otsu_threshold(hist);

    // Integer sums keep mu/sigma independent of pixel order.
    std::uint64_t cnt = 0;
    std::uint64_t sum = 0;
    std::uint64_t sum_sq = 0;
    for (int v = t + 1; v < 256; ++v) {
      const auto k = hist[static_cast<std::size_t>(v)];
      cnt += k;
      sum += k * static_cast<std::uint64_t>(v);
      sum_sq += k * static_cast<std::uint64_t>(v) * static_cast<std::uint64_t>(v);
    }
    double mu = 0.0;
    double sigma = 0.0;
    if (cnt > 0) {
      const double n = static_cast<double>(cnt);
      mu = static_cast<double>(sum) / n;
      // population variance = (N*SS - S^2) / N^2, numerator exact in integers
      const auto num = static_cast<unsigned __int128>(cnt) * sum_sq - static_cast<unsigned __int128>(sum) * sum;
      sigma = std::sqrt(static_cast<double>(num)) / n;
    }

    const double lo = mu - sigma;
    const double hi = mu + sigma;
    std::array<BinaryMask, 3> masks = {BinaryMask(w, h), BinaryMask(w, h), BinaryMask(w, h)};
    for (std::size_t i = 0; i < plane.size(); ++i) {
      const double v = plane[i];
      masks[0].bits[i] = (v > lo && v <= hi) ? 1 : 0;
      masks[1].bits[i] = v > lo ? 1 : 0;
      masks[2].bits[i] = v > mu ? 1 : 0;
    }
    for (const auto& m : masks) {
      for (const auto& hist9 : {tas_histogram(m), tas_histogram(m.complement())}) {
        for (double v : hist9) out[pos++] = v;
      }
    }
  }
  return out;
}

}  // namespace histofilter
