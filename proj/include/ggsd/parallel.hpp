#pragma once

#include <cstddef>
#include <functional>

namespace ggsd {

/// Worker count used by parallel_for. 0 restores the hardware default.
void set_num_threads(unsigned n);
unsigned num_threads();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Callers must only
/// write state owned by their index range; results are then independent of
/// the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_chunk = 256);

}  // namespace ggsd
