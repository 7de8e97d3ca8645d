#pragma once

#include <cstddef>
#include <functional>

namespace aggmrf {

/// Runs body(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. With workers <= 1 the body runs inline on the calling thread.
/// The body must only write to state owned by its own index range.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace aggmrf
