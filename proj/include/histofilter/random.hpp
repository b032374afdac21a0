#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <boost/random/uniform_int_distribution.hpp>

namespace histofilter {

using Rng = std::mt19937_64;

/// Builds an engine from a base seed and any number of stream tags (fold
/// index, class index, ...). Both std::mt19937_64 and std::seed_seq have
/// fully specified algorithms, so streams are identical across platforms.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Fisher-Yates with boost's portable integer distribution (std's is
/// implementation-defined).
template <typename T>
void shuffle_in_place(std::span<T> items, Rng& rng) {
  if (items.size() < 2) return;
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(items[i], items[pick(rng)]);
  }
}

template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  shuffle_in_place(std::span<T>(items), rng);
}

}  // namespace histofilter
