#pragma once

#include <cstddef>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace histofilter {

/// Runs body(i) for i in [0, n). Callers write into pre-sized, index-keyed
/// slots so results do not depend on scheduling order. Worker count is bounded
/// by whatever tbb::global_control the caller has installed.
template <typename Body>
void parallel_for_index(std::size_t n, Body&& body) {
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n), [&](const tbb::blocked_range<std::size_t>& r) {
    for (std::size_t i = r.begin(); i != r.end(); ++i) body(i);
  });
}

}  // namespace histofilter
