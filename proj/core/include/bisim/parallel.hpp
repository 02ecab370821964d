#pragma once

#include <cstddef>
#include <functional>

namespace bisim {

/// Worker count used by the heavy loops (synthesis rows, scan grid points,
/// map columns). Results never depend on it: every index is computed
/// independently and written to its own slot.
void set_worker_count(std::size_t n);
std::size_t worker_count();

/// Calls body(i) for i in [0, n) using static contiguous partitioning.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bisim
