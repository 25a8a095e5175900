#pragma once

#include <cstddef>
#include <functional>

namespace delaymp {

/// 0 means "all hardware threads".
std::size_t resolve_threads(std::size_t requested);

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// only affect scheduling; callers write results by index. The exception of
/// the lowest failing chunk is rethrown.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace delaymp
