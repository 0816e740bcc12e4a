#pragma once

#include <cstddef>
#include <functional>

namespace hcov {

//! worker count used by parallel_for; 0 selects the hardware concurrency
void set_num_threads(std::size_t n);
std::size_t num_threads();

/// Runs body(i) for i in [0, n) on up to \a workers threads (0: num_threads()).
/// The first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t workers = 0);

} // namespace hcov
